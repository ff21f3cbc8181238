#include "dpsnn/grid_topology.hpp"

#include "dpsnn/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <sstream>

namespace dpsnn {

void GridSpec::validate() const
{
    if (width == 0 || height == 0) throw ConfigError("grid width and height must be >= 1");
    if (sizes.f == 0 || sizes.b == 0 || sizes.i == 0)
        throw ConfigError("every population needs at least one neuron per column");
    if (neuron_count() >= (std::uint64_t{1} << 31))
        throw ConfigError("total neuron count must stay below 2^31");
}

NeuronLocation locate(std::uint32_t gid, const GridSpec& grid)
{
    const unsigned k = grid.sizes.total();
    if (gid >= grid.neuron_count())
        throw TopologyError("neuron " + std::to_string(gid) + " outside grid of " +
                            std::to_string(grid.neuron_count()) + " neurons");
    const Column col = grid.column_at(gid / k);
    unsigned off = gid % k;
    if (off < grid.sizes.f) return {col, Population::F, off};
    off -= grid.sizes.f;
    if (off < grid.sizes.b) return {col, Population::B, off};
    return {col, Population::I, off - grid.sizes.b};
}

std::uint32_t global_id(const GridSpec& grid, Column column, Population population, unsigned index)
{
    if (column.x >= grid.width || column.y >= grid.height)
        throw TopologyError("column outside grid");
    if (index >= grid.sizes[population]) throw TopologyError("population index out of range");
    return grid.column_index(column) * grid.sizes.total() + grid.sizes.offset(population) + index;
}

double distance(Column a, Column b)
{
    const double dx = static_cast<double>(a.x) - static_cast<double>(b.x);
    const double dy = static_cast<double>(a.y) - static_cast<double>(b.y);
    return std::hypot(dx, dy);
}

PartitionMap::PartitionMap(const GridSpec& grid, unsigned tiles_x, unsigned tiles_y, unsigned split)
    : grid_(grid), tiles_x_(tiles_x), tiles_y_(tiles_y), split_(split)
{
    grid_.validate();
    if (grid.width % tiles_x != 0 || grid.height % tiles_y != 0)
        throw TopologyError("tiling does not divide the grid");
    if (split > 1 && (tiles_x != grid.width || tiles_y != grid.height))
        throw TopologyError("columns can only be split when every rank hosts one column");
    if (split == 0 || split > grid.sizes.total())
        throw TopologyError("invalid column split factor");
    tile_w_ = grid.width / tiles_x;
    tile_h_ = grid.height / tiles_y;

    const unsigned k = grid.sizes.total();
    unsigned max_local = 0;
    for (unsigned ty = 0; ty < tiles_y; ++ty) {
        for (unsigned tx = 0; tx < tiles_x; ++tx) {
            for (unsigned c = 0; c < split; ++c) {
                RankTile t;
                t.x0 = tx * tile_w_;
                t.y0 = ty * tile_h_;
                t.w = tile_w_;
                t.h = tile_h_;
                if (split > 1) {
                    t.first_neuron = chunk_start(c);
                    t.neuron_count = chunk_start(c + 1) - t.first_neuron;
                } else {
                    t.neuron_count = tile_w_ * tile_h_ * k;
                }
                max_local = std::max(max_local, t.neuron_count);
                tiles_.push_back(t);
            }
        }
    }
    bits_for_local_ = std::max(1u, static_cast<unsigned>(std::bit_width(max_local - 1u)));
    if (max_local == 1) bits_for_local_ = 1;
    if (bits_for_local_ >= 32 ||
        static_cast<std::uint64_t>(tiles_.size()) > (std::uint64_t{1} << (32 - bits_for_local_)))
        throw TopologyError("rank count and local population do not fit 32-bit neuron ids");
}

unsigned PartitionMap::chunk_start(unsigned chunk) const
{
    const unsigned k = grid_.sizes.total();
    const unsigned base = k / split_;
    const unsigned rem = k % split_;
    return chunk * base + std::min(chunk, rem);
}

unsigned PartitionMap::chunk_of(unsigned offset) const
{
    const unsigned k = grid_.sizes.total();
    const unsigned base = k / split_;
    const unsigned rem = k % split_;
    const unsigned big = rem * (base + 1);
    if (offset < big) return offset / (base + 1);
    return rem + (offset - big) / base;
}

unsigned PartitionMap::rank_of(Column column, unsigned offset_in_column) const
{
    if (split_ > 1) return grid_.column_index(column) * split_ + chunk_of(offset_in_column);
    return (column.y / tile_h_) * tiles_x_ + column.x / tile_w_;
}

unsigned PartitionMap::rank_of(std::uint32_t gid) const
{
    const unsigned k = grid_.sizes.total();
    return rank_of(grid_.column_at(gid / k), gid % k);
}

unsigned PartitionMap::local_index_of(std::uint32_t gid) const
{
    const unsigned k = grid_.sizes.total();
    const Column col = grid_.column_at(gid / k);
    const unsigned off = gid % k;
    if (split_ > 1) return off - chunk_start(chunk_of(off));
    const unsigned rank = rank_of(col, off);
    const RankTile& t = tiles_[rank];
    return ((col.y - t.y0) * t.w + (col.x - t.x0)) * k + off;
}

std::uint32_t PartitionMap::global_id_of(unsigned rank, unsigned local) const
{
    const RankTile& t = tiles_.at(rank);
    if (local >= t.neuron_count) throw TopologyError("local index out of range for rank");
    const unsigned k = grid_.sizes.total();
    if (split_ > 1) return (rank / split_) * k + t.first_neuron + local;
    const unsigned col_in_tile = local / k;
    const Column col{t.x0 + col_in_tile % t.w, t.y0 + col_in_tile / t.w};
    return grid_.column_index(col) * k + local % k;
}

NeuronId PartitionMap::neuron_id(std::uint32_t gid) const
{
    return encode_neuron_id(rank_of(gid), local_index_of(gid), bits_for_local_);
}

std::uint32_t PartitionMap::global_id(NeuronId id) const
{
    const auto d = decode_neuron_id(id, bits_for_local_);
    return global_id_of(d.rank, d.local_index);
}

std::vector<unsigned> PartitionMap::ranks_of_column(Column column) const
{
    std::vector<unsigned> out;
    if (split_ > 1) {
        for (unsigned c = 0; c < split_; ++c) out.push_back(grid_.column_index(column) * split_ + c);
    } else {
        out.push_back(rank_of(column, 0));
    }
    return out;
}

std::string PartitionMap::dump() const
{
    std::ostringstream os;
    for (unsigned r = 0; r < tiles_.size(); ++r) {
        const RankTile& t = tiles_[r];
        os << "rank " << r << " tile x=[" << t.x0 << "," << t.x0 + t.w << ") y=[" << t.y0 << ","
           << t.y0 + t.h << ")";
        if (split_ > 1)
            os << " neurons=[" << t.first_neuron << "," << t.first_neuron + t.neuron_count << ")";
        os << " count=" << t.neuron_count << "\n";
    }
    return os.str();
}

namespace {

struct Tiling {
    unsigned tx, ty, split;
};

std::optional<Tiling> find_tiling(const GridSpec& grid, unsigned ranks)
{
    if (ranks == 0) return std::nullopt;
    const unsigned columns = grid.column_count();
    if (ranks > columns) {
        if (ranks % columns != 0) return std::nullopt;
        const unsigned split = ranks / columns;
        if (split > grid.sizes.total()) return std::nullopt;
        return Tiling{grid.width, grid.height, split};
    }
    std::optional<Tiling> best;
    double best_score = 0.0;
    for (unsigned tx = 1; tx <= ranks; ++tx) {
        if (ranks % tx != 0) continue;
        const unsigned ty = ranks / tx;
        if (grid.width % tx != 0 || grid.height % ty != 0) continue;
        const double w = static_cast<double>(grid.width / tx);
        const double h = static_cast<double>(grid.height / ty);
        const double score = std::max(w, h) / std::min(w, h);
        if (!best || score < best_score) {
            best = Tiling{tx, ty, 1};
            best_score = score;
        }
    }
    return best;
}

}  // namespace

bool partition_feasible(const GridSpec& grid, unsigned ranks)
{
    return find_tiling(grid, ranks).has_value();
}

PartitionMap partition(const GridSpec& grid, unsigned ranks)
{
    grid.validate();
    if (ranks == 0) throw TopologyError("rank count must be >= 1");
    if (const auto t = find_tiling(grid, ranks)) return PartitionMap(grid, t->tx, t->ty, t->split);

    std::optional<unsigned> below, above;
    for (unsigned r = ranks - 1; r >= 1 && !below; --r)
        if (partition_feasible(grid, r)) below = r;
    const unsigned limit = grid.column_count() * grid.sizes.total();
    for (unsigned r = ranks + 1; r <= limit && !above; ++r)
        if (partition_feasible(grid, r)) above = r;
    std::string msg = "cannot tile a " + std::to_string(grid.width) + "x" +
                      std::to_string(grid.height) + " grid onto " + std::to_string(ranks) +
                      " ranks; nearest feasible:";
    if (below) msg += " " + std::to_string(*below);
    if (above) msg += " " + std::to_string(*above);
    throw TopologyError(msg);
}

}  // namespace dpsnn
