#pragma once

#include <complex>
#include <string>
#include <vector>

namespace sawstack {

enum class SweepKind { Y, S11 };

/// Frequency grid with a complex one-port response.
struct OnePortSweep {
    std::vector<double> freqs;                 // Hz, strictly increasing
    std::vector<std::complex<double>> values;  // one per frequency
    SweepKind kind = SweepKind::Y;
    double z0 = 50.0;                          // reference impedance, Ohm
    int passivity_violations = 0;              // |S11| > 1 + 1e-6 sample count
};

/// Checks grid monotonicity and value finiteness; for S11 data counts (but
/// tolerates) passivity violations.
void validate_sweep(OnePortSweep& sweep);

OnePortSweep y_to_s11(const OnePortSweep& sweep, double z0);
OnePortSweep s11_to_y(const OnePortSweep& sweep);

enum class BodeQVariant { paper, feld };

struct BodeQOptions {
    BodeQVariant variant = BodeQVariant::paper;
    bool smooth = false;  // Savitzky-Golay window 5, order 2 on Re/Im of S11
};

struct QCurve {
    std::vector<double> freqs;  // Hz, points that passed the |S11| guard
    std::vector<double> q;
    double q_max = 0.0;
    double f_at_q_max = 0.0;
    BodeQVariant variant = BodeQVariant::paper;
    bool smoothed = false;
};

/// Reflection-based quality factor vs frequency.
///   paper: Q = omega |dS11/domega| / (1 - |S11|^2)
///   feld:  Q = omega tau_g |S11| / (1 - |S11|^2),  tau_g = -d(phase)/domega
/// Points with |S11| >= 1 - 1e-9 are excluded from the curve and the max.
QCurve bode_q(const OnePortSweep& sweep, const BodeQOptions& opts = {});

enum class TouchstoneFormat { RI, MA, DB };
enum class FrequencyUnit { HZ, KHZ, MHZ, GHZ };

OnePortSweep read_touchstone(const std::string& path);
OnePortSweep read_touchstone_from_string(const std::string& text);

/// Default emission is `# HZ S RI R <z0>` with 17 significant digits; the
/// unit/format knobs exist for interoperability testing.
void write_touchstone(const OnePortSweep& sweep, const std::string& path,
                      FrequencyUnit unit = FrequencyUnit::HZ,
                      TouchstoneFormat fmt = TouchstoneFormat::RI);
std::string touchstone_to_string(const OnePortSweep& sweep,
                                 FrequencyUnit unit = FrequencyUnit::HZ,
                                 TouchstoneFormat fmt = TouchstoneFormat::RI);

/// Sweep CSV: header `# kind=Y|S11 z0=<ohms>` then `freq_hz,re,im` rows.
std::string sweep_to_csv(const OnePortSweep& sweep);
OnePortSweep sweep_from_csv(const std::string& text);

}  // namespace sawstack
