#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "hitop/common/grid.hpp"

namespace hitop::skeleton {

/// Solid mask of a design (1 = solid), row-major, row 0 at the top.
struct BinaryTopology {
  Mask solid;

  int rows() const noexcept { return solid.rows(); }
  int cols() const noexcept { return solid.cols(); }
  /// Throws ContractError unless both dimensions are >= 16 and a solid pixel exists.
  void validate() const;
};

/// Densities >= threshold become solid.
BinaryTopology binarize(const DensityGrid& density, double threshold = 0.5);

enum class NodeKind { BoundarySeed, Junction, Endpoint, Merged };
const char* to_string(NodeKind kind) noexcept;

struct Node {
  int id = 0;
  int row = 0;
  int col = 0;
  NodeKind kind = NodeKind::Endpoint;
};

struct Edge {
  int a = 0;
  int b = 0;
  std::vector<Pixel> polyline;  ///< from node a to node b, 8-connected skeleton pixels
  double path_length = 0.0;     ///< sum of unit / sqrt(2) steps along the polyline
  double straight_length = 0.0; ///< Euclidean distance between the end nodes
};

struct SkeletonGraph {
  int rows = 0;
  int cols = 0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  std::vector<int> degrees() const;
  int degree(int node) const;
};

/// Guo-Hall thinning followed by removal of corner pixels that are redundant
/// under 8-connectivity, so strokes are one pixel wide.
Mask thin_to_skeleton(const Mask& solid);

/// One seed per maximal solid run along each image edge, at the run midpoint.
/// Sorted row-major, duplicates (corners) removed.
std::vector<Pixel> seed_boundary_nodes(const Mask& solid);

/// Connects each seed to the skeleton with a shortest 8-connected path through
/// solid pixels and adds the path to the skeleton.
Mask attach_seeds(const Mask& skeleton, const Mask& solid, const std::vector<Pixel>& seeds);

struct CellPartition {
  Grid<int> labels;  ///< -1 on skeleton pixels, otherwise the cell id
  int count = 0;
};

/// 4-connected components of the non-skeleton pixels, cells touching the image
/// border included.
CellPartition partition_cells(const Mask& skeleton);

/// Walks every 8-connected section of the skeleton and emits nodes (endpoints,
/// junction clusters, seeds) and the member polylines between them. Throws
/// TraversalError if a section is not fully explored.
SkeletonGraph traverse_sections(const Mask& skeleton, const std::vector<Pixel>& seeds, const CellPartition& cells);

/// Fraction of the rasterised segment a-b (inclusive) that is solid.
double line_solid_fraction(const Mask& solid, Pixel a, Pixel b);

/// Merge radius for an image whose larger side is max_dim pixels.
double default_merge_radius(int max_dim);

/// Repeatedly merges the closest node pair within `radius` (Euclidean) that is
/// connected in the graph. The surviving host is the one of the pair that
/// maximises the minimum straight-line solid fraction of its re-attached
/// members; ties go to the lower id.
SkeletonGraph merge_nearby_nodes(const SkeletonGraph& graph, const Mask& solid, const Mask& skeleton, double radius);

struct Extraction {
  SkeletonGraph graph;
  Mask skeleton;   ///< thinned skeleton with seed spurs
  std::vector<Pixel> seeds;
  int cell_count = 0;
};

Extraction extract_graph_detailed(const BinaryTopology& topology);
SkeletonGraph extract_graph(const BinaryTopology& topology);

/// True iff the nodes form a single connected component. Throws on an empty graph.
bool is_connected(const SkeletonGraph& graph);

nlohmann::json to_json(const SkeletonGraph& graph);

/// Straight and path length helpers.
double polyline_length(const std::vector<Pixel>& polyline);

}  // namespace hitop::skeleton
