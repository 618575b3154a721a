#include "vtp/eigen_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>

#include "vtp/error.hpp"

namespace vtp {

namespace {

using Vec16 = Eigen::Matrix<double, 16, 1>;
using Mat16 = Eigen::Matrix<double, 16, 16>;

constexpr int kMinNodesAlongLength = 40;
constexpr int kWantedEigenpairs = 13;

// Gauss-Legendre points and weights mapped to [0, 1].
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

const Rule& gauss4() {
  static const Rule r = [] {
    const double a = 0.3399810435848563;
    const double b = 0.8611363115940526;
    const double wa = 0.6521451548625461;
    const double wb = 0.3478548451374538;
    Rule out;
    for (auto [p, w] : {std::pair{-b, wb}, {-a, wa}, {a, wa}, {b, wb}}) {
      out.x.push_back(0.5 * (1.0 + p));
      out.w.push_back(0.5 * w);
    }
    return out;
  }();
  return r;
}

const Rule& gauss2() {
  static const Rule r = [] {
    const double p = 1.0 / std::sqrt(3.0);
    return Rule{{0.5 * (1.0 - p), 0.5 * (1.0 + p)}, {0.5, 0.5}};
  }();
  return r;
}

// Cubic Hermite functions on [0, 1]: value at 0, slope at 0, value at 1, slope at 1.
struct Hermite {
  std::array<double, 4> v, d1, d2;
};

Hermite hermite(double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return {{1.0 - 3.0 * s2 + 2.0 * s3, s - 2.0 * s2 + s3, 3.0 * s2 - 2.0 * s3, -s2 + s3},
          {-6.0 * s + 6.0 * s2, 1.0 - 4.0 * s + 3.0 * s2, 6.0 * s - 6.0 * s2, -2.0 * s + 3.0 * s2},
          {-6.0 + 12.0 * s, -4.0 + 6.0 * s, 6.0 - 12.0 * s, -2.0 + 6.0 * s}};
}

struct ShapeValues {
  Vec16 n, nxx, nyy, nxy;  // second derivatives with respect to xi/eta
};

// Local dof 4a + k: node a in (0,0) (1,0) (1,1) (0,1) order, k = w, w_xi,
// w_eta, w_xi_eta.
ShapeValues shape(double xi, double eta) {
  static constexpr int kCorner[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Hermite hx = hermite(xi);
  const Hermite hy = hermite(eta);
  ShapeValues s;
  for (int a = 0; a < 4; ++a) {
    const int vx = kCorner[a][0] == 0 ? 0 : 2;
    const int vy = kCorner[a][1] == 0 ? 0 : 2;
    const int ix[4] = {vx, vx + 1, vx, vx + 1};
    const int iy[4] = {vy, vy, vy + 1, vy + 1};
    for (int k = 0; k < 4; ++k) {
      const int r = 4 * a + k;
      s.n[r] = hx.v[ix[k]] * hy.v[iy[k]];
      s.nxx[r] = hx.d2[ix[k]] * hy.v[iy[k]];
      s.nyy[r] = hx.v[ix[k]] * hy.d2[iy[k]];
      s.nxy[r] = hx.d1[ix[k]] * hy.d1[iy[k]];
    }
  }
  return s;
}

// Adds weight * (bending energy, consistent mass) at one quadrature point.
// Element matrices are in scaled dofs (w, h w_x, h w_y, h^2 w_xy), so the
// curvatures pick up 1/h^2 and the area element h^2.
void accumulate(Mat16& ke, Mat16& me, const ShapeValues& s, const BendingStiffness& d, double rho_t,
                double weight, double h) {
  const double inv_h2 = 1.0 / (h * h);
  const double ck = weight * inv_h2;  // h^2 * (1/h^2)^2
  const double cm = weight * h * h * rho_t;
  ke.noalias() += ck * (d.d11 * s.nxx * s.nxx.transpose() + d.d22 * s.nyy * s.nyy.transpose() +
                        d.d12 * (s.nxx * s.nyy.transpose() + s.nyy * s.nxx.transpose()) +
                        4.0 * d.d66 * s.nxy * s.nxy.transpose());
  me.noalias() += cm * s.n * s.n.transpose();
}

double sq(double v) { return v * v; }

}  // namespace

BendingStiffness bending_stiffness(const MaterialParams& m, double thickness) {
  const double h3 = thickness * thickness * thickness / 12.0;
  const double denom = 1.0 - m.nu_lr * m.nu_rl();
  BendingStiffness d;
  d.d11 = m.e_long * h3 / denom;
  d.d22 = m.e_rad * h3 / denom;
  d.d12 = m.nu_lr * m.e_rad * h3 / denom;
  d.d66 = m.g_lr() * h3;
  return d;
}

DiscretizedPlate discretize(const PlateGeometry& geometry, double resolution, const OracleConfig& config) {
  if (!(resolution > 0.0)) throw Error(ErrorCode::ResolutionTooCoarse, "resolution must be positive");
  std::string why;
  if (!geometry.material.is_valid(&why)) throw Error(ErrorCode::InvalidParams, "material: " + why);
  const double h = 1.0 / resolution;
  const auto& poly = geometry.boundary;
  const Box box = bounding_box(poly);
  const int along = static_cast<int>(std::floor((box.xmax - box.xmin) / h + 1e-9)) + 1;
  if (along < kMinNodesAlongLength) {
    throw Error(ErrorCode::ResolutionTooCoarse, "resolution gives " + std::to_string(along) +
                                                    " nodes along the plate, need at least 40");
  }

  const int i0 = static_cast<int>(std::floor(box.xmin / h)) - 1;
  const int i1 = static_cast<int>(std::ceil(box.xmax / h)) + 1;
  const int j0 = static_cast<int>(std::floor(box.ymin / h)) - 1;
  const int j1 = static_cast<int>(std::ceil(box.ymax / h)) + 1;
  const int ni = i1 - i0;
  const int nj = j1 - j0;

  DiscretizedPlate plate;
  plate.h = h;
  plate.resolution = resolution;
  plate.material = geometry.material;
  plate.edge = config.edge;
  plate.fictitious_stiffness = config.fictitious_stiffness;

  std::vector<int> cell_at(static_cast<std::size_t>(ni * nj), -1);
  const int nsub = std::max(config.subcells, 1);
  const Rule& g4 = gauss4();
  const Rule& g2 = gauss2();

  auto add_point = [&](GridCell& cell, double xi, double eta, double w) {
    const Vec2 pos{(cell.i + xi) * h, (cell.j + eta) * h};
    const double t = geometry.thickness_at(pos);
    if (!(t > 0.0)) throw Error(ErrorCode::NonPositiveThickness, "thickness not positive inside the plate");
    cell.quadrature.push_back({xi, eta, w, t});
  };

  for (int j = j0; j < j1; ++j) {
    const Box strip_box{box.xmin - 1.0, box.xmax + 1.0, j * h, (j + 1) * h};
    const std::vector<Vec2> strip = clip_to_box(poly, strip_box);
    if (strip.size() < 3) continue;
    const Box sb = bounding_box(strip);
    const int ia = static_cast<int>(std::floor(sb.xmin / h));
    const int ib = static_cast<int>(std::ceil(sb.xmax / h));
    for (int i = ia; i < ib; ++i) {
      const Box cb{i * h, (i + 1) * h, j * h, (j + 1) * h};
      const std::vector<Vec2> piece = clip_to_box(strip, cb);
      if (piece.size() < 3) continue;
      const double frac = std::min(signed_area(piece) / (h * h), 1.0);
      if (frac <= config.min_cell_fraction) continue;

      GridCell cell;
      cell.i = i;
      cell.j = j;
      cell.fraction = frac;
      cell.center_thickness = geometry.thickness_at({(i + 0.5) * h, (j + 0.5) * h});
      if (frac >= 1.0 - 1e-12) {
        cell.fraction = 1.0;
        for (std::size_t a = 0; a < 4; ++a)
          for (std::size_t b = 0; b < 4; ++b) add_point(cell, g4.x[a], g4.x[b], g4.w[a] * g4.w[b]);
      } else {
        const double sub = 1.0 / nsub;
        for (int sx = 0; sx < nsub; ++sx) {
          for (int sy = 0; sy < nsub; ++sy) {
            const Box subbox{(i + sx * sub) * h, (i + (sx + 1) * sub) * h, (j + sy * sub) * h,
                             (j + (sy + 1) * sub) * h};
            const std::vector<Vec2> part = clip_to_box(piece, subbox);
            if (part.size() < 3) continue;
            const double sub_frac = signed_area(part) / sq(sub * h);
            if (sub_frac <= 0.0) continue;
            for (std::size_t a = 0; a < 2; ++a)
              for (std::size_t b = 0; b < 2; ++b)
                add_point(cell, (sx + g2.x[a]) * sub, (sy + g2.x[b]) * sub,
                          g2.w[a] * g2.w[b] * sub * sub * std::min(sub_frac, 1.0));
          }
        }
        if (!(cell.center_thickness > 0.0)) {
          throw Error(ErrorCode::NonPositiveThickness, "thickness not positive inside the plate");
        }
      }
      cell_at[static_cast<std::size_t>((i - i0) * nj + (j - j0))] = static_cast<int>(plate.cells.size());
      plate.cells.push_back(std::move(cell));
    }
  }
  if (plate.cells.empty()) throw Error(ErrorCode::DegenerateMask, "no lattice cell intersects the plate");

  // Edge connectivity of the active cells.
  {
    std::vector<char> seen(plate.cells.size(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!queue.empty()) {
      const GridCell& c = plate.cells[static_cast<std::size_t>(queue.front())];
      queue.pop_front();
      const int di[4] = {1, -1, 0, 0};
      const int dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int ii = c.i + di[k] - i0;
        const int jj = c.j + dj[k] - j0;
        if (ii < 0 || jj < 0 || ii >= ni || jj >= nj) continue;
        const int idx = cell_at[static_cast<std::size_t>(ii * nj + jj)];
        if (idx >= 0 && !seen[static_cast<std::size_t>(idx)]) {
          seen[static_cast<std::size_t>(idx)] = 1;
          ++reached;
          queue.push_back(idx);
        }
      }
    }
    if (reached != plate.cells.size()) {
      throw Error(ErrorCode::DegenerateMask, "plate mask splits into disconnected components");
    }
  }

  // Nodes in lattice order.
  std::vector<int> node_at(static_cast<std::size_t>((ni + 1) * (nj + 1)), -1);
  auto node_slot = [&](int i, int j) -> int& {
    return node_at[static_cast<std::size_t>((i - i0) * (nj + 1) + (j - j0))];
  };
  for (const GridCell& c : plate.cells) {
    for (auto [di, dj] : {std::pair{0, 0}, {1, 0}, {1, 1}, {0, 1}}) node_slot(c.i + di, c.j + dj) = 0;
  }
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      int& slot = node_slot(i, j);
      if (slot < 0) continue;
      slot = static_cast<int>(plate.nodes.size());
      GridNode node;
      node.i = i;
      node.j = j;
      node.pos = {i * h, j * h};
      node.inside = contains(poly, node.pos);
      node.thickness = geometry.thickness_at(node.pos);
      node.stiffness = bending_stiffness(geometry.material, node.thickness);
      plate.nodes.push_back(node);
    }
  }
  for (GridCell& c : plate.cells) {
    int a = 0;
    for (auto [di, dj] : {std::pair{0, 0}, {1, 0}, {1, 1}, {0, 1}}) {
      c.nodes[static_cast<std::size_t>(a++)] = node_slot(c.i + di, c.j + dj);
    }
    if (c.fraction < 1.0) {
      for (int n : c.nodes) plate.nodes[static_cast<std::size_t>(n)].on_cut_cell = true;
    }
  }
  return plate;
}

DiscretizedPlate renumber_nodes(const DiscretizedPlate& plate, std::span<const int> perm) {
  if (perm.size() != plate.nodes.size()) throw Error(ErrorCode::InvalidParams, "permutation size mismatch");
  DiscretizedPlate out = plate;
  for (std::size_t k = 0; k < perm.size(); ++k) out.nodes[static_cast<std::size_t>(perm[k])] = plate.nodes[k];
  for (GridCell& c : out.cells) {
    for (int& n : c.nodes) n = perm[static_cast<std::size_t>(n)];
  }
  return out;
}

SystemMatrices assemble(const DiscretizedPlate& plate) {
  const double h = plate.h;
  const double rho = plate.material.rho;

  std::vector<int> incident(plate.nodes.size(), 0);
  for (const GridCell& c : plate.cells)
    for (int n : c.nodes) ++incident[static_cast<std::size_t>(n)];

  SystemMatrices out;
  out.dof_map.assign(plate.dof_count(), -1);
  int next = 0;
  for (std::size_t n = 0; n < plate.nodes.size(); ++n) {
    const bool clamped = plate.edge == EdgeCondition::Clamped &&
                         (plate.nodes[n].on_cut_cell || incident[n] < 4);
    for (std::size_t k = 0; k < 4; ++k) out.dof_map[4 * n + k] = clamped ? -1 : next++;
  }

  std::vector<Eigen::Triplet<double>> kt;
  std::vector<Eigen::Triplet<double>> mt;
  kt.reserve(plate.cells.size() * 256);
  mt.reserve(plate.cells.size() * 256);

  const Rule& g4 = gauss4();
  for (const GridCell& c : plate.cells) {
    Mat16 ke = Mat16::Zero();
    Mat16 me = Mat16::Zero();
    for (const QuadPoint& q : c.quadrature) {
      accumulate(ke, me, shape(q.xi, q.eta), bending_stiffness(plate.material, q.thickness), rho * q.thickness,
                 q.weight, h);
    }
    if (c.fraction < 1.0 && plate.fictitious_stiffness > 0.0) {
      // Keeps every active cell's kernel at the rigid motions.
      const BendingStiffness d = bending_stiffness(plate.material, c.center_thickness);
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b)
          accumulate(ke, me, shape(g4.x[a], g4.x[b]), d, rho * c.center_thickness,
                     plate.fictitious_stiffness * g4.w[a] * g4.w[b], h);
    }
    std::array<int, 16> rows{};
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t k = 0; k < 4; ++k)
        rows[4 * a + k] = out.dof_map[4 * static_cast<std::size_t>(c.nodes[a]) + k];
    for (int r = 0; r < 16; ++r) {
      if (rows[static_cast<std::size_t>(r)] < 0) continue;
      for (int s = 0; s < 16; ++s) {
        if (rows[static_cast<std::size_t>(s)] < 0) continue;
        kt.emplace_back(rows[static_cast<std::size_t>(r)], rows[static_cast<std::size_t>(s)], ke(r, s));
        mt.emplace_back(rows[static_cast<std::size_t>(r)], rows[static_cast<std::size_t>(s)], me(r, s));
      }
    }
  }
  out.stiffness.resize(next, next);
  out.mass.resize(next, next);
  out.stiffness.setFromTriplets(kt.begin(), kt.end());
  out.mass.setFromTriplets(mt.begin(), mt.end());
  return out;
}

namespace {

EigenPairs solve_lowest(const DiscretizedPlate& plate, const OracleConfig& config) {
  const SystemMatrices sys = assemble(plate);
  if (sys.mass.rows() == 0) throw Error(ErrorCode::MassNotPositive, "no free degrees of freedom");
  for (Eigen::Index i = 0; i < sys.mass.rows(); ++i) {
    if (!(sys.mass.coeff(i, i) > 0.0)) throw Error(ErrorCode::MassNotPositive, "mass matrix has a non-positive diagonal");
  }
  EigenOptions opts;
  opts.count = static_cast<int>(std::min<Eigen::Index>(kWantedEigenpairs, sys.stiffness.rows()));
  opts.shift = sq(2.0 * std::numbers::pi * config.shift_hz);
  opts.tolerance = config.residual_tolerance;
  return lowest_eigenpairs(sys.stiffness, sys.mass, opts);
}

int count_rigid(const EigenPairs& pairs, const OracleConfig& config) {
  const double threshold = sq(2.0 * std::numbers::pi * config.rigid_threshold_hz);
  return static_cast<int>(std::count_if(pairs.values.begin(), pairs.values.end(),
                                        [&](double v) { return v < threshold; }));
}

}  // namespace

ModalResult solve_modes(const DiscretizedPlate& plate, const OracleConfig& config) {
  const EigenPairs pairs = solve_lowest(plate, config);
  const int rigid = count_rigid(pairs, config);
  if (plate.edge == EdgeCondition::Free && rigid != 3) {
    throw Error(ErrorCode::EigenSolveFailure,
                "free plate shows " + std::to_string(rigid) + " rigid-body modes instead of 3");
  }
  if (pairs.values.size() < static_cast<std::size_t>(rigid) + kModeCount) {
    throw Error(ErrorCode::EigenSolveFailure, "too few elastic modes computed");
  }
  ModalResult out;
  out.resolution = plate.resolution;
  out.dofs = plate.dof_count();
  out.rigid_modes = rigid;
  for (std::size_t i = 0; i < kModeCount; ++i) {
    const double lambda = pairs.values[static_cast<std::size_t>(rigid) + i];
    out.freqs_hz[i] = std::sqrt(lambda) / (2.0 * std::numbers::pi);
    out.residuals.push_back(pairs.residuals[static_cast<std::size_t>(rigid) + i]);
  }
  return out;
}

int rigid_body_count(const DiscretizedPlate& plate, const OracleConfig& config) {
  return count_rigid(solve_lowest(plate, config), config);
}

ModalResult oracle_spectrum(const PlateParams& params, const OracleConfig& config, const ReferencePlate& ref) {
  const PlateGeometry geometry = realize(params, ref, config.boundary_samples);
  return solve_modes(discretize(geometry, config.resolution, config), config);
}

nlohmann::json to_json(const ModalResult& r) {
  return {{"freqs_hz", r.freqs_hz}, {"resolution", r.resolution}, {"dofs", r.dofs},
          {"rigid_modes", r.rigid_modes}, {"residuals", r.residuals}};
}

ModalResult modal_result_from_json(const nlohmann::json& j) {
  ModalResult r;
  const auto& f = j.at("freqs_hz");
  if (!f.is_array() || f.size() != kModeCount) throw Error(ErrorCode::InvalidParams, "freqs_hz: expected 10 entries");
  for (std::size_t i = 0; i < kModeCount; ++i) r.freqs_hz[i] = f[i].get<double>();
  r.resolution = j.value("resolution", 0.0);
  r.dofs = j.value("dofs", std::size_t{0});
  r.rigid_modes = j.value("rigid_modes", 0);
  if (j.contains("residuals")) r.residuals = j.at("residuals").get<std::vector<double>>();
  return r;
}

void write_coordinate(std::ostream& os, const SparseMatrix& matrix) {
  os.precision(17);
  for (int col = 0; col < matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

}  // namespace vtp
