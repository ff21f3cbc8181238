#pragma once

// Bidimensional grid of columns, the global neuron numbering and the
// geometric partition of columns onto ranks.
//
// Global numbering is row-major over columns (x fastest), and inside a column
// the F block precedes the B block which precedes the I block.

#include "dpsnn/core_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dpsnn {

struct Column {
    unsigned x = 0;
    unsigned y = 0;
    friend bool operator==(const Column&, const Column&) = default;
};

struct GridSpec {
    unsigned width = 1;
    unsigned height = 1;
    PopulationSizes sizes;
    double imd_mm = 0.0;  // physical size of one grid spacing, 0 when unused

    void validate() const;
    unsigned column_count() const { return width * height; }
    unsigned column_index(Column c) const { return c.y * width + c.x; }
    Column column_at(unsigned index) const { return {index % width, index / width}; }
    std::uint64_t neuron_count() const
    {
        return std::uint64_t{column_count()} * sizes.total();
    }
};

struct NeuronLocation {
    Column column;
    Population population;
    unsigned index;  // within the population of that column
    friend bool operator==(const NeuronLocation&, const NeuronLocation&) = default;
};

NeuronLocation locate(std::uint32_t global_id, const GridSpec& grid);
std::uint32_t global_id(const GridSpec& grid, Column column, Population population, unsigned index);

/// Euclidean distance in grid spacings.
double distance(Column a, Column b);

/// Rectangular tile of columns hosted by one rank. When columns are split,
/// the tile is a single column and the rank owns the neuron range
/// [first_neuron, first_neuron + neuron_count) of it.
struct RankTile {
    unsigned x0 = 0, y0 = 0, w = 1, h = 1;
    unsigned first_neuron = 0;  // within-column offset, only for split columns
    unsigned neuron_count = 0;  // neurons hosted by the rank
};

class PartitionMap {
public:
    PartitionMap() = default;
    PartitionMap(const GridSpec& grid, unsigned tiles_x, unsigned tiles_y, unsigned split);

    unsigned rank_count() const { return static_cast<unsigned>(tiles_.size()); }
    unsigned tiles_x() const { return tiles_x_; }
    unsigned tiles_y() const { return tiles_y_; }
    /// How many ranks share one column (1 when columns are not split).
    unsigned split() const { return split_; }
    unsigned bits_for_local() const { return bits_for_local_; }
    const RankTile& tile(unsigned rank) const { return tiles_.at(rank); }
    const GridSpec& grid() const { return grid_; }

    unsigned rank_of(std::uint32_t global_id) const;
    unsigned local_index_of(std::uint32_t global_id) const;
    std::uint32_t global_id_of(unsigned rank, unsigned local_index) const;

    NeuronId neuron_id(std::uint32_t global_id) const;
    std::uint32_t global_id(NeuronId id) const;

    /// Ranks hosting any neuron of `column`.
    std::vector<unsigned> ranks_of_column(Column column) const;
    /// Rank hosting neuron `offset` (0 .. K-1) of `column`.
    unsigned rank_of(Column column, unsigned offset_in_column) const;

    /// One line per rank: tile rectangle and neuron count.
    std::string dump() const;

private:
    unsigned chunk_of(unsigned offset_in_column) const;
    unsigned chunk_start(unsigned chunk) const;

    GridSpec grid_;
    unsigned tiles_x_ = 1, tiles_y_ = 1, split_ = 1;
    unsigned tile_w_ = 1, tile_h_ = 1;
    unsigned bits_for_local_ = 1;
    std::vector<RankTile> tiles_;
};

/// Deterministic near-square rectangular tiling of the grid onto `ranks`.
/// Throws TopologyError naming the nearest feasible rank counts otherwise.
PartitionMap partition(const GridSpec& grid, unsigned ranks);

bool partition_feasible(const GridSpec& grid, unsigned ranks);

}  // namespace dpsnn
