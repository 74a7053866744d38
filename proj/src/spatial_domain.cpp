#include "stgm/spatial_domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "stgm/format.hpp"

namespace stgm {

ProjectorError::ProjectorError(const std::string& message, std::size_t sample)
    : ModelError("sample " + std::to_string(sample) + ": " + message), sample_(sample) {}

// ---------------------------------------------------------------- mesh

SpatialDomain SpatialDomain::mesh(std::vector<Point2> vertices, std::vector<std::array<Index, 3>> triangles) {
  const Index n = static_cast<Index>(vertices.size());
  if (n == 0) throw ModelError("mesh has no vertices");
  if (triangles.empty()) throw ModelError("mesh has no triangles");

  double extent = 0.0;
  for (const auto& v : vertices) extent = std::max({extent, std::abs(v.x), std::abs(v.y)});
  const double area_floor = 1e-14 * std::max(extent * extent, 1e-300);

  MeshPayload m;
  m.mass = Eigen::VectorXd::Zero(n);
  std::vector<Triplet> k_trip;
  k_trip.reserve(triangles.size() * 9);
  SpatialDomain d;
  d.boxes_.reserve(triangles.size());
  for (std::size_t e = 0; e < triangles.size(); ++e) {
    const auto& tri = triangles[e];
    for (Index v : tri)
      if (v < 0 || v >= n) throw ModelError("triangle " + std::to_string(e) + " references unknown vertex");
    const Point2& p0 = vertices[tri[0]];
    const Point2& p1 = vertices[tri[1]];
    const Point2& p2 = vertices[tri[2]];
    double signed2 = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    double area = 0.5 * std::abs(signed2);
    if (!(area > area_floor)) throw ModelError("degenerate triangle " + std::to_string(e));
    std::array<double, 3> b{p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
    std::array<double, 3> c{p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
    for (int i = 0; i < 3; ++i) {
      m.mass[tri[i]] += area / 3.0;
      for (int j = 0; j < 3; ++j) k_trip.emplace_back(tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
    }
    d.boxes_.push_back({std::min({p0.x, p1.x, p2.x}), std::max({p0.x, p1.x, p2.x}), std::min({p0.y, p1.y, p2.y}),
                        std::max({p0.y, p1.y, p2.y})});
  }
  for (Index i = 0; i < n; ++i)
    if (!(m.mass[i] > 0.0)) throw ModelError("vertex " + std::to_string(i) + " belongs to no triangle");
  m.stiffness.resize(n, n);
  m.stiffness.setFromTriplets(k_trip.begin(), k_trip.end());
  m.stiffness.makeCompressed();
  Eigen::VectorXd inv_mass = m.mass.cwiseInverse();
  m.stiffness2 = SparseMatrix(m.stiffness * inv_mass.asDiagonal()) * m.stiffness;
  m.stiffness2.makeCompressed();
  m.vertices = std::move(vertices);
  m.triangles = std::move(triangles);
  d.payload_ = std::move(m);
  return d;
}

SparseSymMatrix build_mesh_precision(const MeshPayload& mesh, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ModelError("mesh precision requires kappa > 0");
  const double k2 = kappa * kappa;
  const Index n = mesh.mass.size();
  SparseMatrix c(n, n);
  c.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Index i = 0; i < n; ++i) c.insert(i, i) = mesh.mass[i];
  SparseMatrix q = (k2 * k2) * c + (2.0 * k2) * mesh.stiffness + mesh.stiffness2;
  return SparseSymMatrix(std::move(q));
}

std::optional<ProjectorRow> SpatialDomain::locate(Point2 p) const {
  const auto& m = mesh_payload();
  for (std::size_t e = 0; e < m.triangles.size(); ++e) {
    const auto& box = boxes_[e];
    const double pad = 1e-12 * std::max({1.0, box[1] - box[0], box[3] - box[2]});
    if (p.x < box[0] - pad || p.x > box[1] + pad || p.y < box[2] - pad || p.y > box[3] + pad) continue;
    const auto& tri = m.triangles[e];
    const Point2& a = m.vertices[tri[0]];
    const Point2& b = m.vertices[tri[1]];
    const Point2& c = m.vertices[tri[2]];
    double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    double w1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    double w2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    double w0 = 1.0 - w1 - w2;
    constexpr double tol = 1e-10;
    if (w0 < -tol || w1 < -tol || w2 < -tol) continue;
    std::array<double, 3> w{std::max(w0, 0.0), std::max(w1, 0.0), std::max(w2, 0.0)};
    double total = w[0] + w[1] + w[2];
    ProjectorRow row;
    for (int i = 0; i < 3; ++i) {
      double wi = w[i] / total;
      if (wi <= 1e-14) continue;
      row.node[row.count] = tri[i];
      row.weight[row.count] = wi;
      ++row.count;
    }
    return row;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- areal

SpatialDomain SpatialDomain::areal(std::vector<std::array<Index, 2>> edges, std::optional<Index> nodes) {
  Index n = 0;
  for (const auto& e : edges) {
    if (e[0] < 0 || e[1] < 0) throw ModelError("areal graph: negative node index");
    if (e[0] == e[1]) throw ModelError("areal graph: self-loop at node " + std::to_string(e[0]));
    n = std::max({n, e[0] + 1, e[1] + 1});
  }
  if (nodes) {
    if (*nodes < n) throw ModelError("areal graph: edge references node beyond declared node count");
    n = *nodes;
  }
  if (n == 0) throw ModelError("areal graph has no nodes");
  std::set<std::pair<Index, Index>> adj;
  for (const auto& e : edges) {
    adj.insert({e[0], e[1]});
    adj.insert({e[1], e[0]});
  }
  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  for (const auto& [i, j] : adj) ++degree[i];
  std::vector<Triplet> t;
  for (const auto& [i, j] : adj) t.emplace_back(i, j, 1.0 / static_cast<double>(degree[i]));
  ArealPayload a;
  a.weights.resize(n, n);
  a.weights.setFromTriplets(t.begin(), t.end());
  a.weights.makeCompressed();
  SpatialDomain d;
  d.payload_ = std::move(a);
  return d;
}

SparseSymMatrix build_sar_precision(const ArealPayload& areal, double rho, double sd) {
  if (!(rho > -1.0 && rho < 1.0)) throw ModelError("SAR precision requires -1 < rho < 1");
  if (!(sd > 0.0) || !std::isfinite(sd)) throw ModelError("SAR precision requires sd > 0");
  const Index n = areal.weights.rows();
  SparseMatrix eye(n, n);
  eye.setIdentity();
  SparseMatrix b = eye - rho * areal.weights;
  SparseMatrix q = SparseMatrix(b.transpose()) * b;
  // keep the 2-hop pattern even at rho == 0
  SparseMatrix pattern = SparseMatrix(areal.weights.transpose()) * areal.weights + areal.weights +
                         SparseMatrix(areal.weights.transpose());
  q = q + 0.0 * pattern;
  return SparseSymMatrix(SparseMatrix(q / (sd * sd)));
}

// ---------------------------------------------------------------- stream

SpatialDomain SpatialDomain::stream(std::vector<Index> parent, std::vector<double> distance) {
  const Index n = static_cast<Index>(parent.size());
  if (n == 0) throw ModelError("stream network has no nodes");
  if (static_cast<Index>(distance.size()) != n) throw ModelError("stream network: parent/distance size mismatch");
  for (Index i = 0; i < n; ++i) {
    if (parent[i] < -1 || parent[i] >= n) throw ModelError("stream network: node " + std::to_string(i) + " has unknown parent");
    if (parent[i] == i) throw ModelError("stream network: cycle detected at node " + std::to_string(i));
    if (parent[i] >= 0 && !(distance[i] > 0.0 && std::isfinite(distance[i])))
      throw ModelError("stream network: nonpositive distance at node " + std::to_string(i));
  }
  // 0 = unvisited, 1 = on current path, 2 = reaches a root
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> path;
    Index v = i;
    while (v >= 0 && state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = parent[v];
    }
    if (v >= 0 && state[v] == 1) throw ModelError("stream network: cycle detected at node " + std::to_string(v));
    for (Index p : path) state[p] = 2;
  }
  StreamPayload s{std::move(parent), std::move(distance)};
  SpatialDomain d;
  d.payload_ = std::move(s);
  return d;
}

SparseSymMatrix build_stream_precision(const StreamPayload& stream, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ModelError("stream precision requires theta > 0");
  const Index n = static_cast<Index>(stream.parent.size());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(4 * n));
  for (Index i = 0; i < n; ++i) {
    Index p = stream.parent[i];
    if (p < 0) {
      t.emplace_back(i, i, 1.0);
      continue;
    }
    double rho = std::exp(-theta * stream.distance[i]);
    double tau = 1.0 / (-std::expm1(-2.0 * theta * stream.distance[i]));
    t.emplace_back(i, i, tau);
    t.emplace_back(p, p, tau * rho * rho);
    t.emplace_back(i, p, -tau * rho);
    t.emplace_back(p, i, -tau * rho);
  }
  SparseMatrix q(n, n);
  q.setFromTriplets(t.begin(), t.end());
  return SparseSymMatrix(std::move(q), false);
}

// ---------------------------------------------------------------- generic

SpatialDomain SpatialDomain::single_site() {
  SpatialDomain d;
  d.payload_ = SingleSitePayload{};
  return d;
}

DomainKind SpatialDomain::kind() const {
  switch (payload_.index()) {
    case 0: return DomainKind::Mesh;
    case 1: return DomainKind::Areal;
    case 2: return DomainKind::Stream;
    default: return DomainKind::SingleSite;
  }
}

std::string SpatialDomain::kind_name() const {
  switch (kind()) {
    case DomainKind::Mesh: return "mesh";
    case DomainKind::Areal: return "areal";
    case DomainKind::Stream: return "stream";
    default: return "single_site";
  }
}

Index SpatialDomain::num_nodes() const {
  switch (kind()) {
    case DomainKind::Mesh: return static_cast<Index>(mesh_payload().vertices.size());
    case DomainKind::Areal: return areal_payload().weights.rows();
    case DomainKind::Stream: return static_cast<Index>(stream_payload().parent.size());
    default: return 1;
  }
}

std::string SpatialDomain::parameter_name() const {
  switch (kind()) {
    case DomainKind::Mesh: return "kappa";
    case DomainKind::Areal: return "rho";
    case DomainKind::Stream: return "theta";
    default: return "";
  }
}

double SpatialDomain::default_parameter() const {
  switch (kind()) {
    case DomainKind::Mesh: {
      // correlation range (sqrt(8) / kappa) of about a third of the extent
      const auto& v = mesh_payload().vertices;
      double x0 = v[0].x, x1 = v[0].x, y0 = v[0].y, y1 = v[0].y;
      for (const auto& p : v) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
      double diag = std::hypot(x1 - x0, y1 - y0);
      return std::sqrt(8.0) * 3.0 / diag;
    }
    case DomainKind::Areal: return 0.0;
    case DomainKind::Stream: {
      const auto& s = stream_payload();
      double total = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < s.parent.size(); ++i)
        if (s.parent[i] >= 0) {
          total += s.distance[i];
          ++count;
        }
      return count > 0 ? static_cast<double>(count) / (3.0 * total) : 1.0;
    }
    default: return 0.0;
  }
}

SparseSymMatrix SpatialDomain::precision(double parameter) const {
  switch (kind()) {
    case DomainKind::Mesh: return build_mesh_precision(mesh_payload(), parameter);
    case DomainKind::Areal: return build_sar_precision(areal_payload(), parameter, 1.0);
    case DomainKind::Stream: return build_stream_precision(stream_payload(), parameter);
    default: return SparseSymMatrix::identity(1);
  }
}

std::optional<ProjectorRow> SpatialDomain::node_row(Index id) const {
  if (kind() == DomainKind::SingleSite) return ProjectorRow::unit(0);
  if (kind() == DomainKind::Mesh) return std::nullopt;
  if (id < 0 || id >= num_nodes()) return std::nullopt;
  return ProjectorRow::unit(id);
}

std::vector<ProjectorRow> make_projector(const SpatialDomain& domain, std::span<const Point2> points) {
  std::vector<ProjectorRow> rows;
  rows.reserve(points.size());
  if (domain.kind() != DomainKind::Mesh) {
    if (domain.kind() == DomainKind::SingleSite) return std::vector<ProjectorRow>(points.size(), ProjectorRow::unit(0));
    throw ModelError("coordinate projector requires a mesh domain");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto r = domain.locate(points[i]);
    if (!r) throw ProjectorError("point outside mesh hull", i);
    rows.push_back(*r);
  }
  return rows;
}

std::vector<ProjectorRow> make_projector(const SpatialDomain& domain, std::span<const Index> node_ids) {
  if (domain.kind() == DomainKind::Mesh) throw ModelError("mesh projector requires coordinates");
  std::vector<ProjectorRow> rows;
  rows.reserve(node_ids.size());
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    auto r = domain.node_row(node_ids[i]);
    if (!r) throw ProjectorError("unknown node id " + std::to_string(node_ids[i]), i);
    rows.push_back(*r);
  }
  return rows;
}

// ---------------------------------------------------------------- files

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
void for_each_data_line(std::string_view text, F&& f) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> tokens;
    std::istringstream ss{std::string(line)};
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    f(line_no, tokens);
  }
}

double number_at(const std::vector<std::string>& tokens, std::size_t i, int line_no) {
  auto v = i < tokens.size() ? parse_double(tokens[i]) : std::nullopt;
  if (!v) throw ModelError("line " + std::to_string(line_no) + ": expected a number");
  return *v;
}

Index index_at(const std::vector<std::string>& tokens, std::size_t i, int line_no) {
  double v = number_at(tokens, i, line_no);
  if (v != std::floor(v)) throw ModelError("line " + std::to_string(line_no) + ": expected an integer index");
  return static_cast<Index>(v);
}

}  // namespace

SpatialDomain parse_mesh(std::string_view text) {
  std::vector<Point2> vertices;
  std::vector<std::array<Index, 3>> triangles;
  for_each_data_line(text, [&](int line_no, const std::vector<std::string>& tok) {
    if (tok[0] == "v" && tok.size() == 3) {
      vertices.push_back({number_at(tok, 1, line_no), number_at(tok, 2, line_no)});
    } else if (tok[0] == "t" && tok.size() == 4) {
      triangles.push_back({index_at(tok, 1, line_no), index_at(tok, 2, line_no), index_at(tok, 3, line_no)});
    } else {
      throw ModelError("mesh file line " + std::to_string(line_no) + ": expected 'v x y' or 't i j k'");
    }
  });
  return SpatialDomain::mesh(std::move(vertices), std::move(triangles));
}

SpatialDomain parse_areal(std::string_view text, std::optional<Index> nodes) {
  std::vector<std::array<Index, 2>> edges;
  for_each_data_line(text, [&](int line_no, const std::vector<std::string>& tok) {
    if (tok.size() != 2) throw ModelError("areal file line " + std::to_string(line_no) + ": expected 'i j'");
    edges.push_back({index_at(tok, 0, line_no), index_at(tok, 1, line_no)});
  });
  return SpatialDomain::areal(std::move(edges), nodes);
}

SpatialDomain parse_stream(std::string_view text) {
  std::vector<std::array<double, 3>> rows;
  for_each_data_line(text, [&](int line_no, const std::vector<std::string>& tok) {
    if (tok.size() != 3)
      throw ModelError("stream file line " + std::to_string(line_no) + ": expected 'node parent distance'");
    rows.push_back({static_cast<double>(index_at(tok, 0, line_no)), static_cast<double>(index_at(tok, 1, line_no)),
                    number_at(tok, 2, line_no)});
  });
  const Index n = static_cast<Index>(rows.size());
  std::vector<Index> parent(static_cast<std::size_t>(n), -2);
  std::vector<double> distance(static_cast<std::size_t>(n), 0.0);
  for (const auto& r : rows) {
    Index node = static_cast<Index>(r[0]);
    if (node < 0 || node >= n) throw ModelError("stream file: node ids must be 0.." + std::to_string(n - 1));
    if (parent[node] != -2) throw ModelError("stream file: node " + std::to_string(node) + " listed twice");
    parent[node] = static_cast<Index>(r[1]);
    distance[node] = r[2];
  }
  return SpatialDomain::stream(std::move(parent), std::move(distance));
}

SpatialDomain read_mesh_file(const std::string& path) { return parse_mesh(slurp(path)); }
SpatialDomain read_areal_file(const std::string& path, std::optional<Index> nodes) {
  return parse_areal(slurp(path), nodes);
}
SpatialDomain read_stream_file(const std::string& path) { return parse_stream(slurp(path)); }

}  // namespace stgm
