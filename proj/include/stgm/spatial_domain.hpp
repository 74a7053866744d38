#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stgm/sparse_sym.hpp"

namespace stgm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Triangulated 2-D domain with lumped-mass linear finite elements.
struct MeshPayload {
  std::vector<Point2> vertices;
  std::vector<std::array<Index, 3>> triangles;
  Eigen::VectorXd mass;     // lumped (diagonal) mass
  SparseMatrix stiffness;   // G
  SparseMatrix stiffness2;  // G C^{-1} G, independent of kappa
};

/// Areal graph with row-normalized adjacency W (isolated nodes: zero row).
struct ArealPayload {
  SparseMatrix weights;
};

/// Forest of stream reaches; parent -1 marks a root.
struct StreamPayload {
  std::vector<Index> parent;
  std::vector<double> distance;
};

struct SingleSitePayload {};

enum class DomainKind { Mesh, Areal, Stream, SingleSite };

/// Up to three (node, weight) pairs mapping one sample onto the nodes.
struct ProjectorRow {
  int count = 0;
  std::array<Index, 3> node{};
  std::array<double, 3> weight{};

  static ProjectorRow unit(Index n) {
    ProjectorRow r;
    r.count = 1;
    r.node[0] = n;
    r.weight[0] = 1.0;
    return r;
  }
};

class SpatialDomain {
 public:
  static SpatialDomain mesh(std::vector<Point2> vertices, std::vector<std::array<Index, 3>> triangles);
  /// `edges` are symmetrized; node count is max(index) + 1 unless given.
  static SpatialDomain areal(std::vector<std::array<Index, 2>> edges, std::optional<Index> nodes = std::nullopt);
  static SpatialDomain stream(std::vector<Index> parent, std::vector<double> distance);
  static SpatialDomain single_site();

  DomainKind kind() const;
  Index num_nodes() const;
  std::string kind_name() const;

  const MeshPayload& mesh_payload() const { return std::get<MeshPayload>(payload_); }
  const ArealPayload& areal_payload() const { return std::get<ArealPayload>(payload_); }
  const StreamPayload& stream_payload() const { return std::get<StreamPayload>(payload_); }

  /// Mesh: kappa; Areal: rho (SD fixed at 1); Stream: theta. None for a
  /// single site.
  bool has_parameter() const { return kind() != DomainKind::SingleSite; }
  std::string parameter_name() const;
  double default_parameter() const;

  SparseSymMatrix precision(double parameter) const;

  /// Mesh only: barycentric row of the containing triangle.
  std::optional<ProjectorRow> locate(Point2 p) const;
  /// Areal / Stream / SingleSite: unit row; single site ignores the id.
  std::optional<ProjectorRow> node_row(Index id) const;

 private:
  std::variant<MeshPayload, ArealPayload, StreamPayload, SingleSitePayload> payload_;
  // per-triangle bounding boxes for point location
  std::vector<std::array<double, 4>> boxes_;
};

/// kappa^4 C + 2 kappa^2 G + G C^{-1} G (alpha = 2 SPDE, lumped mass).
SparseSymMatrix build_mesh_precision(const MeshPayload& mesh, double kappa);

/// (I - rho W)^T (I - rho W) / sd^2.
SparseSymMatrix build_sar_precision(const ArealPayload& areal, double rho, double sd);

/// Tree Ornstein-Uhlenbeck precision: each node given its parent at
/// distance d is Normal(exp(-theta d) parent, 1 - exp(-2 theta d)); roots
/// are standard normal.
SparseSymMatrix build_stream_precision(const StreamPayload& stream, double theta);

/// Error raised for a sample that cannot be projected (outside the mesh
/// hull or unknown node id).
class ProjectorError : public ModelError {
 public:
  ProjectorError(const std::string& message, std::size_t sample);
  std::size_t sample() const { return sample_; }

 private:
  std::size_t sample_;
};

std::vector<ProjectorRow> make_projector(const SpatialDomain& domain, std::span<const Point2> points);
std::vector<ProjectorRow> make_projector(const SpatialDomain& domain, std::span<const Index> node_ids);

/// `v x y` / `t i j k` lines (0-based), `#` comments.
SpatialDomain read_mesh_file(const std::string& path);
/// `i j` edge per line (0-based).
SpatialDomain read_areal_file(const std::string& path, std::optional<Index> nodes = std::nullopt);
/// `node parent distance` per line, parent -1 for roots.
SpatialDomain read_stream_file(const std::string& path);

SpatialDomain parse_mesh(std::string_view text);
SpatialDomain parse_areal(std::string_view text, std::optional<Index> nodes = std::nullopt);
SpatialDomain parse_stream(std::string_view text);

}  // namespace stgm
