#pragma once

#include "sawstack/oneport.hpp"

#include <string>
#include <vector>

namespace sawstack {

/// One-port modified Butterworth-Van Dyke model: static branch c0 (+ series
/// r0 dielectric loss) in parallel with a motional rm-lm-cm branch, all
/// behind a series resistance rs.
struct MbvdModel {
    double c0 = 0.0;  // F
    double cm = 0.0;  // F
    double lm = 0.0;  // H
    double rm = 0.0;  // Ohm
    double rs = 0.0;  // Ohm
    double r0 = 0.0;  // Ohm

    double fs() const;  // series resonance 1/(2 pi sqrt(lm cm))
};

void validate_model(const MbvdModel& m);

std::string serialize_model(const MbvdModel& m);
MbvdModel model_from_json(const std::string& text);

struct ResonancePair {
    double fs = 0.0;  // Hz
    double fp = 0.0;  // Hz
};

/// Eq-style coupling from the series/parallel resonance split:
/// k_eff^2 = (pi^2 / 8) (fp^2 - fs^2) / fs^2.
double keff2_from_fsfp(const ResonancePair& pair);

/// Inverse map: fp = fs sqrt(1 + 8 k^2 / pi^2).
double fp_from_keff2(double fs, double k2);

/// Builds a model with cm = 8 k^2 c0 / pi^2, lm tuned to fs, and the whole
/// loss budget in rm = 2 pi fs lm / q (rs = r0 = 0).
MbvdModel synthesize_mbvd(double fs, double k2, double c0, double q);

/// Complex admittance of the model over a strictly increasing grid.
OnePortSweep admittance(const MbvdModel& model, const std::vector<double>& freqs);

struct FindResonancesOptions {
    double prominence_db = 6.0;  // admittance peaks below this are ignored
};

struct ResonanceSet {
    std::vector<ResonancePair> pairs;        // ordered by fs
    std::vector<double> peak_mag_db;         // |Y| at each series peak, dB(S)
    std::vector<double> prominence_db;
};

/// Locates series/parallel resonances on an admittance sweep. Peaks are
/// selected by topographic prominence on 20 log10|Y|; fs is refined at the
/// conductance maximum and fp at the resistance maximum, which (unlike the
/// raw |Y| extrema) are not biased by the static-branch susceptance.
ResonanceSet find_resonances(const OnePortSweep& sweep, const FindResonancesOptions& opts = {});

struct FitResult {
    MbvdModel model;
    double rms_residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Damped least squares over {c0, cm, lm, rm, rs, r0}, log-parameterized for
/// positivity; stops when the relative step drops below 1e-10 or after 200
/// iterations.
FitResult fit_mbvd(const OnePortSweep& sweep, const MbvdModel& init);

}  // namespace sawstack
