#pragma once

#include "sawstack/circuit.hpp"
#include "sawstack/dispersion.hpp"
#include "sawstack/oneport.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sawstack {

/// IDT geometry metadata; the electrode-count dependence is recorded, not modeled.
struct ResonatorGeometry {
    int ne = 0;                    // electrode pairs
    int reflector_pairs = 0;
    double aperture_wavelengths = 0.0;
    double film_thickness = 0.0;   // m
    double h_over_lambda = 0.0;

    double wavelength() const { return film_thickness / h_over_lambda; }
};

enum class RowSource { simulated, measured };

struct DesignRow {
    double h_over_lambda = 0.0;
    ModeLabel label = ModeLabel::Rayleigh;
    double fs = 0.0;    // Hz
    double v_p = 0.0;   // m/s
    double k2 = 0.0;
    RowSource source = RowSource::simulated;
};

/// Maps dispersion branches to frequency rows: fs = v_free * r / h.
std::vector<DesignRow> design_table(const std::vector<DispersionBranch>& branches,
                                    double film_thickness);

std::string design_table_to_csv(const std::vector<DesignRow>& rows);

struct DriftReport {
    std::vector<double> powers_dbm;
    std::vector<double> fs_hz;
    std::vector<double> fs_shift_ppm;        // relative to the first sweep
    std::vector<double> peak_mag_change_db;  // relative to the first sweep
    double hysteresis_ppm = 0.0;             // |fs(last) - fs(first)| in ppm
};

/// Tracks the strongest resonance across a power-ordered family of sweeps
/// sharing one frequency grid. S11 sweeps are converted to admittance first.
DriftReport compare_power_sweeps(const std::vector<OnePortSweep>& sweeps,
                                 const std::vector<double>& powers_dbm);

std::string drift_report_to_json(const DriftReport& report);

struct BenchmarkRow {
    std::string reference;  // short citation tag
    std::string platform;
    std::string mode;
    std::string substrate;
    double fs_ghz = 0.0;
    double v_p = 0.0;       // m/s
    double k2_percent = 0.0;
    double q_max = 0.0;
};

/// Published state-of-the-art rows bundled as reference data.
const std::vector<BenchmarkRow>& reference_benchmark_rows();

struct BenchmarkTable {
    std::vector<BenchmarkRow> rows;
};

/// Appends user entries to the bundled reference rows (unless disabled).
BenchmarkTable benchmark_table(const std::vector<BenchmarkRow>& entries,
                               bool include_reference = true);

std::string benchmark_table_to_csv(const BenchmarkTable& table);
std::string benchmark_table_to_text(const BenchmarkTable& table);
std::vector<BenchmarkRow> benchmark_rows_from_csv(const std::string& text);

}  // namespace sawstack
