#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "vtp/eigensolver.hpp"
#include "vtp/geometry.hpp"
#include "vtp/params.hpp"

namespace vtp {

// Orthotropic Kirchhoff bending stiffnesses (N m); index 1 is the grain (x).
struct BendingStiffness {
  double d11 = 0.0;
  double d22 = 0.0;
  double d12 = 0.0;
  double d66 = 0.0;
};

BendingStiffness bending_stiffness(const MaterialParams& material, double thickness);

enum class EdgeCondition { Free, Clamped };

struct OracleConfig {
  double resolution = 120.0;  // lattice nodes per metre
  int boundary_samples = 480;
  EdgeCondition edge = EdgeCondition::Free;
  int subcells = 4;                 // per direction, in cells cut by the outline
  double min_cell_fraction = 1e-6;  // cells with less material are dropped
  double fictitious_stiffness = 1e-5;
  double shift_hz = 20.0;
  double rigid_threshold_hz = 1.0;
  double residual_tolerance = 1e-8;
};

struct GridNode {
  int i = 0;
  int j = 0;
  Vec2 pos;
  bool inside = false;
  bool on_cut_cell = false;
  double thickness = 0.0;
  BendingStiffness stiffness;
};

struct QuadPoint {
  double xi = 0.0;   // reference coordinates in [0, 1]^2
  double eta = 0.0;
  double weight = 0.0;  // includes the material fraction, excludes h^2
  double thickness = 0.0;
};

struct GridCell {
  int i = 0;
  int j = 0;
  double fraction = 0.0;  // share of the cell covered by the plate
  std::array<int, 4> nodes{};  // (0,0) (1,0) (1,1) (0,1) corners
  double center_thickness = 0.0;
  std::vector<QuadPoint> quadrature;
};

// Lattice of square bicubic Hermite cells (nodes at integer multiples of h,
// independent of the outline) covering the plate. Cells cut by the outline
// are integrated on sub-cells weighted by their exact clipped area.
struct DiscretizedPlate {
  double h = 0.0;
  double resolution = 0.0;
  MaterialParams material;
  EdgeCondition edge = EdgeCondition::Free;
  double fictitious_stiffness = 0.0;
  std::vector<GridNode> nodes;
  std::vector<GridCell> cells;

  std::size_t dof_count() const { return 4 * nodes.size(); }
};

// Throws ResolutionTooCoarse (fewer than 40 nodes along the plate),
// DegenerateMask (disconnected cells) or NonPositiveThickness.
DiscretizedPlate discretize(const PlateGeometry& geometry, double resolution, const OracleConfig& config = {});

// Same plate with node k renamed to perm[k].
DiscretizedPlate renumber_nodes(const DiscretizedPlate& plate, std::span<const int> perm);

struct SystemMatrices {
  SparseMatrix stiffness;
  SparseMatrix mass;
  std::vector<int> dof_map;  // plate dof -> system row, -1 when clamped
};

SystemMatrices assemble(const DiscretizedPlate& plate);

struct ModalResult {
  std::array<double, kModeCount> freqs_hz{};
  double resolution = 0.0;
  std::size_t dofs = 0;
  int rigid_modes = 0;
  std::vector<double> residuals;
};

// First ten elastic eigenfrequencies; free plates must show exactly three
// rigid-body modes below config.rigid_threshold_hz.
ModalResult solve_modes(const DiscretizedPlate& plate, const OracleConfig& config = {});

int rigid_body_count(const DiscretizedPlate& plate, const OracleConfig& config = {});

// realize -> discretize -> solve_modes at config.resolution.
ModalResult oracle_spectrum(const PlateParams& params, const OracleConfig& config = {},
                            const ReferencePlate& ref = ReferencePlate::violin());

nlohmann::json to_json(const ModalResult& result);
ModalResult modal_result_from_json(const nlohmann::json& j);

// Coordinate text format, one "row col value" triple per line.
void write_coordinate(std::ostream& os, const SparseMatrix& matrix);

}  // namespace vtp
