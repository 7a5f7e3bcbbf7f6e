#include "sawstack/circuit.hpp"
#include "sawstack/errors.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sawstack {

using nlohmann::json;
using cxd = std::complex<double>;

namespace {
constexpr double kPi = std::numbers::pi;
}

double MbvdModel::fs() const { return 1.0 / (2.0 * kPi * std::sqrt(lm * cm)); }

void validate_model(const MbvdModel& m) {
    if (!(m.c0 > 0.0) || !(m.cm > 0.0) || !(m.lm > 0.0))
        throw ValidationError("mBVD model requires c0, cm, lm > 0");
    if (m.rm < 0.0 || m.rs < 0.0 || m.r0 < 0.0)
        throw ValidationError("mBVD resistances must be non-negative");
    if (!std::isfinite(m.fs()))
        throw ValidationError("mBVD model has non-finite series resonance");
}

std::string serialize_model(const MbvdModel& m) {
    json j;
    j["c0"] = m.c0;
    j["cm"] = m.cm;
    j["lm"] = m.lm;
    j["rm"] = m.rm;
    j["rs"] = m.rs;
    j["r0"] = m.r0;
    return j.dump(2) + "\n";
}

MbvdModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("mBVD model parse failure: ") + ex.what());
    }
    MbvdModel m;
    try {
        m.c0 = j.at("c0").get<double>();
        m.cm = j.at("cm").get<double>();
        m.lm = j.at("lm").get<double>();
        m.rm = j.value("rm", 0.0);
        m.rs = j.value("rs", 0.0);
        m.r0 = j.value("r0", 0.0);
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("mBVD model missing field: ") + ex.what());
    }
    validate_model(m);
    return m;
}

double keff2_from_fsfp(const ResonancePair& pair) {
    if (!(pair.fs > 0.0))
        throw ValidationError("keff2_from_fsfp requires fs > 0");
    if (pair.fp < pair.fs)
        throw ValidationError("keff2_from_fsfp requires fp >= fs");
    return kPi * kPi / 8.0 * (pair.fp * pair.fp - pair.fs * pair.fs) / (pair.fs * pair.fs);
}

double fp_from_keff2(double fs, double k2) {
    if (!(fs > 0.0) || k2 < 0.0)
        throw ValidationError("fp_from_keff2 requires fs > 0 and k2 >= 0");
    return fs * std::sqrt(1.0 + 8.0 * k2 / (kPi * kPi));
}

MbvdModel synthesize_mbvd(double fs, double k2, double c0, double q) {
    if (!(fs > 0.0) || !(k2 > 0.0) || !(c0 > 0.0) || !(q > 0.0))
        throw ValidationError("synthesize_mbvd requires positive fs, k2, c0, q");
    MbvdModel m;
    m.c0 = c0;
    m.cm = 8.0 * k2 * c0 / (kPi * kPi);
    const double ws = 2.0 * kPi * fs;
    m.lm = 1.0 / (ws * ws * m.cm);
    m.rm = ws * m.lm / q;
    m.rs = 0.0;
    m.r0 = 0.0;
    return m;
}

namespace {

cxd model_admittance(const MbvdModel& m, double f) {
    const cxd jw(0.0, 2.0 * kPi * f);
    const cxd z_mot = m.rm + jw * m.lm + 1.0 / (jw * m.cm);
    const cxd y_static = 1.0 / (m.r0 + 1.0 / (jw * m.c0));
    return 1.0 / (m.rs + 1.0 / (y_static + 1.0 / z_mot));
}

}  // namespace

OnePortSweep admittance(const MbvdModel& model, const std::vector<double>& freqs) {
    validate_model(model);
    if (freqs.empty())
        throw ValidationError("admittance: empty frequency grid");
    OnePortSweep sweep;
    sweep.kind = SweepKind::Y;
    sweep.freqs = freqs;
    sweep.values.reserve(freqs.size());
    double prev = 0.0;
    for (double f : freqs) {
        if (!(f > 0.0) || f <= prev)
            throw ValidationError("admittance: frequencies must be positive and strictly increasing");
        prev = f;
        sweep.values.push_back(model_admittance(model, f));
    }
    return sweep;
}

namespace {

// 3-point parabolic refinement of an extremum location
double parabolic_peak(const std::vector<double>& x, const std::vector<double>& y, size_t i) {
    if (i == 0 || i + 1 >= x.size()) return x[i];
    const double a = y[i - 1], b = y[i], c = y[i + 1];
    const double denom = a - 2.0 * b + c;
    if (denom == 0.0) return x[i];
    return x[i] + 0.5 * (a - c) / denom * (x[i + 1] - x[i]);
}

// topographic prominence of local maxima of y
std::vector<std::pair<size_t, double>> prominent_peaks(const std::vector<double>& y,
                                                       double min_prominence) {
    std::vector<size_t> peaks;
    for (size_t i = 1; i + 1 < y.size(); ++i)
        if (y[i] > y[i - 1] && y[i] >= y[i + 1]) peaks.push_back(i);
    std::vector<std::pair<size_t, double>> out;
    for (size_t p : peaks) {
        // walk left/right to the valley floor bounding this peak: stop at a
        // strictly higher point or the edge
        double left_min = y[p], right_min = y[p];
        for (size_t i = p; i-- > 0;) {
            if (y[i] > y[p]) break;
            left_min = std::min(left_min, y[i]);
        }
        for (size_t i = p + 1; i < y.size(); ++i) {
            if (y[i] > y[p]) break;
            right_min = std::min(right_min, y[i]);
        }
        const double prom = y[p] - std::max(left_min, right_min);
        if (prom >= min_prominence) out.emplace_back(p, prom);
    }
    return out;
}

}  // namespace

ResonanceSet find_resonances(const OnePortSweep& sweep, const FindResonancesOptions& opts) {
    if (sweep.kind != SweepKind::Y)
        throw ValidationError("find_resonances expects an admittance (kind Y) sweep");
    const size_t n = sweep.freqs.size();
    if (n < 5)
        throw ValidationError("find_resonances needs at least 5 points");

    std::vector<double> mag_db(n), cond(n), resist(n);
    for (size_t i = 0; i < n; ++i) {
        const cxd y = sweep.values[i];
        mag_db[i] = 20.0 * std::log10(std::max(std::abs(y), 1e-300));
        cond[i] = std::max(y.real(), 0.0);
        const cxd z = 1.0 / y;
        resist[i] = std::max(z.real(), 0.0);
    }

    auto peaks = prominent_peaks(mag_db, opts.prominence_db);
    if (peaks.empty())
        throw SolverError("no resonance found (no interior admittance maximum above threshold)");

    ResonanceSet result;
    for (size_t pi = 0; pi < peaks.size(); ++pi) {
        const size_t p = peaks[pi].first;
        // window: from this peak to the next prominent peak (or the grid end)
        const size_t wend = pi + 1 < peaks.size() ? peaks[pi + 1].first : n - 1;

        // fs: conductance maximum near the |Y| peak
        size_t wlo = pi > 0 ? peaks[pi - 1].first : 0;
        size_t ic = p;
        for (size_t i = wlo; i <= wend; ++i)
            if (cond[i] > cond[ic]) ic = i;
        std::vector<double> logc(n);
        for (size_t i = 0; i < n; ++i) logc[i] = std::log(std::max(cond[i], 1e-300));
        const double fs = parabolic_peak(sweep.freqs, logc, ic);

        // fp: resistance maximum after fs, strictly interior to the window
        size_t ir = p;
        bool found = false;
        for (size_t i = p + 1; i < wend; ++i)
            if (!found || resist[i] > resist[ir]) { ir = i; found = true; }
        if (!found || ir + 1 >= n || ir == p + 0)
            throw SolverError("fp not bracketed (parallel resonance hit the grid edge)");
        if (ir + 1 == wend && resist[wend] > resist[ir])
            throw SolverError("fp not bracketed (parallel resonance hit the window edge)");
        std::vector<double> logr(n);
        for (size_t i = 0; i < n; ++i) logr[i] = std::log(std::max(resist[i], 1e-300));
        const double fp = parabolic_peak(sweep.freqs, logr, ir);

        ResonancePair pair{fs, std::max(fp, fs)};
        result.pairs.push_back(pair);
        result.peak_mag_db.push_back(mag_db[p]);
        result.prominence_db.push_back(peaks[pi].second);
    }
    return result;
}

namespace {

Eigen::VectorXd residual_vector(const OnePortSweep& data, const MbvdModel& m) {
    const size_t n = data.freqs.size();
    Eigen::VectorXd r(2 * n);
    for (size_t i = 0; i < n; ++i) {
        const cxd d = model_admittance(m, data.freqs[i]) - data.values[i];
        r[2 * i] = d.real();
        r[2 * i + 1] = d.imag();
    }
    return r;
}

MbvdModel from_log_params(const Eigen::VectorXd& p) {
    MbvdModel m;
    m.c0 = std::exp(p[0]);
    m.cm = std::exp(p[1]);
    m.lm = std::exp(p[2]);
    m.rm = std::exp(p[3]);
    m.rs = std::exp(p[4]);
    m.r0 = std::exp(p[5]);
    return m;
}

}  // namespace

FitResult fit_mbvd(const OnePortSweep& sweep, const MbvdModel& init) {
    if (sweep.kind != SweepKind::Y)
        throw ValidationError("fit_mbvd expects an admittance (kind Y) sweep");
    if (sweep.freqs.size() < 6)
        throw ValidationError("fit_mbvd needs at least 6 frequency points");
    for (const cxd& v : sweep.values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw ValidationError("fit_mbvd: sweep contains non-finite values");

    // log parameterization; zero-valued loss terms get a tiny positive floor
    Eigen::VectorXd p(6);
    p[0] = std::log(std::max(init.c0, 1e-18));
    p[1] = std::log(std::max(init.cm, 1e-19));
    p[2] = std::log(std::max(init.lm, 1e-15));
    p[3] = std::log(std::max(init.rm, 1e-6));
    p[4] = std::log(std::max(init.rs, 1e-6));
    p[5] = std::log(std::max(init.r0, 1e-6));

    Eigen::VectorXd r = residual_vector(sweep, from_log_params(p));
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;

    for (; iter < 200 && !converged; ++iter) {
        // forward-difference Jacobian in log space
        Eigen::MatrixXd J(r.size(), 6);
        const double step = 1e-7;
        for (int k = 0; k < 6; ++k) {
            Eigen::VectorXd pk = p;
            pk[k] += step;
            J.col(k) = (residual_vector(sweep, from_log_params(pk)) - r) / step;
        }
        const Eigen::MatrixXd jtj = J.transpose() * J;
        const Eigen::VectorXd jtr = J.transpose() * r;

        bool stepped = false;
        for (int tries = 0; tries < 20; ++tries) {
            Eigen::MatrixXd damped = jtj;
            for (int k = 0; k < 6; ++k)
                damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
            const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
            const Eigen::VectorXd pnew = p + delta;
            const Eigen::VectorXd rnew = residual_vector(sweep, from_log_params(pnew));
            const double cnew = rnew.squaredNorm();
            if (std::isfinite(cnew) && cnew <= cost) {
                p = pnew;
                r = rnew;
                cost = cnew;
                lambda = std::max(lambda * 0.25, 1e-12);
                stepped = true;
                if (delta.cwiseAbs().maxCoeff() < 1e-10) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            converged = cost == 0.0 || iter > 0;  // stuck at a (local) minimum
            break;
        }
    }

    FitResult out;
    out.model = from_log_params(p);
    out.rms_residual = std::sqrt(cost / static_cast<double>(sweep.freqs.size()));
    out.converged = converged;
    out.iterations = iter;
    return out;
}

}  // namespace sawstack
