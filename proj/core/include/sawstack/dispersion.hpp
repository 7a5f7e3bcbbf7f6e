#pragma once

#include "sawstack/materials.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sawstack {

enum class SurfaceBc { free, metallized };

/// Film layers on a half-space substrate. The substrate occupies z < 0,
/// layers stack bottom to top from z = 0. A metallized surface means an
/// infinitesimally thin shorted conductor, not a mass-loading layer.
struct LayerStack {
    MaterialTensorSet substrate;
    std::vector<std::pair<MaterialTensorSet, double>> layers;  // (material, thickness m)
    SurfaceBc surface_bc = SurfaceBc::free;
    Eigen::Vector3d propagation_direction = Eigen::Vector3d::UnitX();
};

void validate_stack(const LayerStack& stack);

/// Builds a LayerStack from its JSON description, resolving material names
/// against the database and baking each material's Euler orientation in.
LayerStack load_stack(const std::string& path, const MaterialDb& db);
LayerStack load_stack_from_string(const std::string& json_text, const MaterialDb& db);

enum class ModeLabel { Rayleigh, Sezawa, higher };

std::string to_string(ModeLabel label);

/// Field magnitudes vs depth; z = 0 is the film/substrate interface,
/// negative z is inside the substrate.
struct DepthProfile {
    std::vector<double> z;                          // m
    std::vector<std::array<double, 4>> magnitude;   // |u1|,|u2|,|u3|,|phi|, normalized
};

struct GuidedMode {
    double phase_velocity = 0.0;   // m/s
    int mode_index = 0;            // 0-based, ascending velocity
    ModeLabel label = ModeLabel::Rayleigh;
    DepthProfile depth_profile;
    double residual = 0.0;         // |boundary indicator| at the root
};

struct SearchConfig {
    int scan_points = 2000;        // uniform velocity grid over the subsonic window
    double rel_tol = 1e-9;         // bisection relative tolerance
    double residual_accept = 1e-8; // refined roots above this are rejected (poles)
    int profile_points = 201;
    double profile_depth_wavelengths = 2.0;  // substrate depth sampled below z = 0
    bool compute_profiles = true;
};

/// Slowest substrate bulk velocity along the propagation direction; the
/// subsonic search window is (0, this).
double subsonic_limit(const LayerStack& stack);

/// Real sign-changing indicator proportional to the boundary-condition
/// determinant of the stack at trial phase velocity v, O(1)-normalized.
/// Vanishes exactly at guided modes. Throws DegenerateEvaluation at
/// isolated velocities where the partial-wave eigenproblem degenerates.
double boundary_determinant(const LayerStack& stack, double v, double wavelength);

std::vector<GuidedMode> find_guided_modes(const LayerStack& stack, double wavelength,
                                          const SearchConfig& config = {});

/// k^2 = 2 (v_free - v_metal) / v_free.
double coupling_dvv(double v_free, double v_metal);

struct DispersionPoint {
    double h_over_lambda = 0.0;
    double wavelength = 0.0;   // m
    double v_free = 0.0;       // m/s
    double v_metal = 0.0;      // m/s
    double k2_dvv = 0.0;
    ModeLabel label = ModeLabel::Rayleigh;
};

struct DispersionBranch {
    ModeLabel label = ModeLabel::Rayleigh;
    int mode_index = 0;
    std::vector<DispersionPoint> points;  // ordered by h_over_lambda
};

struct SweepPointFailure {
    double h_over_lambda = 0.0;
    std::string message;
};

struct BranchSweepResult {
    std::vector<DispersionBranch> branches;  // ordered by mode_index
    std::vector<SweepPointFailure> failures;
};

/// Runs free and metallized searches at wavelength = h / r for every grid
/// value r, pairs modes by index, and assembles per-mode branches. Bad grid
/// points are recorded and skipped, never fatal.
BranchSweepResult solve_branches(const LayerStack& stack_template, double film_thickness,
                                 const std::vector<double>& h_over_lambda_grid,
                                 const SearchConfig& config = {});

std::string branches_to_csv(const BranchSweepResult& result);

}  // namespace sawstack
