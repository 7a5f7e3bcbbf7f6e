#include "sawstack/oneport.hpp"
#include "sawstack/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sawstack {

using cxd = std::complex<double>;

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kPassivityTol = 1e-6;
constexpr double kS11Guard = 1e-9;
}  // namespace

void validate_sweep(OnePortSweep& sweep) {
    if (sweep.freqs.size() != sweep.values.size())
        throw ValidationError("sweep: frequency and value counts differ");
    if (sweep.freqs.empty())
        throw ValidationError("sweep: empty");
    double prev = 0.0;
    for (double f : sweep.freqs) {
        if (!(f > 0.0) || f <= prev)
            throw ValidationError("sweep: frequencies must be positive and strictly increasing");
        prev = f;
    }
    sweep.passivity_violations = 0;
    for (const cxd& v : sweep.values) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw ValidationError("sweep: non-finite value");
        if (sweep.kind == SweepKind::S11 && std::abs(v) > 1.0 + kPassivityTol)
            ++sweep.passivity_violations;
    }
}

OnePortSweep y_to_s11(const OnePortSweep& sweep, double z0) {
    if (sweep.kind != SweepKind::Y)
        throw ValidationError("y_to_s11 expects a kind-Y sweep");
    if (!(z0 > 0.0))
        throw ValidationError("y_to_s11 requires z0 > 0");
    OnePortSweep out;
    out.kind = SweepKind::S11;
    out.z0 = z0;
    out.freqs = sweep.freqs;
    out.values.reserve(sweep.values.size());
    for (const cxd& y : sweep.values) {
        const cxd denom = 1.0 + z0 * y;
        const cxd s = (1.0 - z0 * y) / denom;
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw SolverError("y_to_s11: singular point Y = -1/z0");
        out.values.push_back(s);
    }
    validate_sweep(out);
    return out;
}

OnePortSweep s11_to_y(const OnePortSweep& sweep) {
    if (sweep.kind != SweepKind::S11)
        throw ValidationError("s11_to_y expects a kind-S11 sweep");
    OnePortSweep out;
    out.kind = SweepKind::Y;
    out.z0 = sweep.z0;
    out.freqs = sweep.freqs;
    out.values.reserve(sweep.values.size());
    for (const cxd& s : sweep.values) {
        const cxd y = (1.0 - s) / (sweep.z0 * (1.0 + s));
        if (!std::isfinite(y.real()) || !std::isfinite(y.imag()))
            throw SolverError("s11_to_y: singular point S11 = -1");
        out.values.push_back(y);
    }
    validate_sweep(out);
    return out;
}

namespace {

// Savitzky-Golay (window 5, order 2) smoothing; near-uniform grids assumed.
std::vector<double> sg5(const std::vector<double>& y) {
    const size_t n = y.size();
    if (n < 5) return y;
    std::vector<double> out(y);
    static const double w[5] = {-3.0 / 35, 12.0 / 35, 17.0 / 35, 12.0 / 35, -3.0 / 35};
    for (size_t i = 2; i + 2 < n; ++i) {
        double s = 0;
        for (int k = -2; k <= 2; ++k) s += w[k + 2] * y[i + k];
        out[i] = s;
    }
    return out;
}

// central differences on a possibly non-uniform grid, one-sided at the edges
template <typename T>
std::vector<T> gradient(const std::vector<double>& x, const std::vector<T>& y) {
    const size_t n = x.size();
    std::vector<T> d(n);
    for (size_t i = 0; i < n; ++i) {
        if (i == 0)
            d[i] = (y[1] - y[0]) / (x[1] - x[0]);
        else if (i + 1 == n)
            d[i] = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
        else {
            const double hl = x[i] - x[i - 1], hr = x[i + 1] - x[i];
            // weighted central difference, exact for quadratics
            d[i] = (hl * hl * y[i + 1] - hr * hr * y[i - 1] + (hr * hr - hl * hl) * y[i]) /
                   (hl * hr * (hl + hr));
        }
    }
    return d;
}

}  // namespace

QCurve bode_q(const OnePortSweep& sweep, const BodeQOptions& opts) {
    if (sweep.kind != SweepKind::S11)
        throw ValidationError("bode_q expects a kind-S11 sweep");
    const size_t n = sweep.freqs.size();
    if (n < 5)
        throw ValidationError("bode_q needs at least 5 frequency points");

    std::vector<double> re(n), im(n);
    for (size_t i = 0; i < n; ++i) {
        re[i] = sweep.values[i].real();
        im[i] = sweep.values[i].imag();
    }
    if (opts.smooth) {
        re = sg5(re);
        im = sg5(im);
    }

    std::vector<double> omega(n);
    for (size_t i = 0; i < n; ++i) omega[i] = 2.0 * kPi * sweep.freqs[i];

    std::vector<cxd> s(n);
    for (size_t i = 0; i < n; ++i) s[i] = cxd(re[i], im[i]);

    QCurve out;
    out.variant = opts.variant;
    out.smoothed = opts.smooth;

    if (opts.variant == BodeQVariant::paper) {
        const std::vector<cxd> ds = gradient(omega, s);
        for (size_t i = 0; i < n; ++i) {
            const double mag = std::abs(s[i]);
            if (mag >= 1.0 - kS11Guard) continue;
            out.freqs.push_back(sweep.freqs[i]);
            out.q.push_back(omega[i] * std::abs(ds[i]) / (1.0 - mag * mag));
        }
    } else {
        std::vector<double> phase(n);
        phase[0] = std::arg(s[0]);
        for (size_t i = 1; i < n; ++i) {
            double d = std::arg(s[i]) - std::arg(s[i - 1]);
            while (d > kPi) d -= 2.0 * kPi;
            while (d < -kPi) d += 2.0 * kPi;
            phase[i] = phase[i - 1] + d;
        }
        const std::vector<double> dphi = gradient(omega, phase);
        for (size_t i = 0; i < n; ++i) {
            const double mag = std::abs(s[i]);
            if (mag >= 1.0 - kS11Guard) continue;
            const double tau = -dphi[i];
            out.freqs.push_back(sweep.freqs[i]);
            out.q.push_back(omega[i] * std::abs(tau) * mag / (1.0 - mag * mag));
        }
    }

    if (out.q.empty())
        throw SolverError("bode_q: all points excluded by the |S11| guard");
    size_t imax = 0;
    for (size_t i = 1; i < out.q.size(); ++i)
        if (out.q[i] > out.q[imax]) imax = i;
    out.q_max = out.q[imax];
    out.f_at_q_max = out.freqs[imax];
    return out;
}

// ------------------------------------------------------------- Touchstone

namespace {

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

double unit_scale(FrequencyUnit u) {
    switch (u) {
        case FrequencyUnit::HZ: return 1.0;
        case FrequencyUnit::KHZ: return 1e3;
        case FrequencyUnit::MHZ: return 1e6;
        default: return 1e9;
    }
}

const char* unit_name(FrequencyUnit u) {
    switch (u) {
        case FrequencyUnit::HZ: return "HZ";
        case FrequencyUnit::KHZ: return "KHZ";
        case FrequencyUnit::MHZ: return "MHZ";
        default: return "GHZ";
    }
}

}  // namespace

OnePortSweep read_touchstone_from_string(const std::string& text) {
    double scale = 1e9;  // Touchstone defaults: GHZ, MA, R 50
    TouchstoneFormat fmt = TouchstoneFormat::MA;
    double z0 = 50.0;
    bool option_seen = false;

    OnePortSweep sweep;
    sweep.kind = SweepKind::S11;

    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto bang = line.find('!'); bang != std::string::npos) line.erase(bang);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;

        if (first == "#") {
            if (option_seen)
                throw ValidationError("touchstone: multiple option lines");
            option_seen = true;
            std::string tok;
            while (ls >> tok) {
                const std::string t = upper(tok);
                if (t == "HZ") scale = 1.0;
                else if (t == "KHZ") scale = 1e3;
                else if (t == "MHZ") scale = 1e6;
                else if (t == "GHZ") scale = 1e9;
                else if (t == "S") { /* parameter type */ }
                else if (t == "RI") fmt = TouchstoneFormat::RI;
                else if (t == "MA") fmt = TouchstoneFormat::MA;
                else if (t == "DB") fmt = TouchstoneFormat::DB;
                else if (t == "R") {
                    if (!(ls >> z0))
                        throw ValidationError("touchstone: option 'R' missing impedance");
                } else {
                    throw ValidationError("touchstone: unknown option token '" + tok + "'");
                }
            }
            continue;
        }

        // data line: frequency + exactly one parameter pair for a 1-port
        std::istringstream ds(line);
        std::vector<double> nums;
        double x;
        while (ds >> x) nums.push_back(x);
        if (nums.empty()) continue;
        if (nums.size() != 3)
            throw ValidationError("touchstone line " + std::to_string(lineno) +
                                  ": expected 3 columns for 1-port data (wrong port count?)");
        const double f = nums[0] * scale;
        cxd v;
        switch (fmt) {
            case TouchstoneFormat::RI: v = cxd(nums[1], nums[2]); break;
            case TouchstoneFormat::MA: v = std::polar(nums[1], nums[2] * kPi / 180.0); break;
            case TouchstoneFormat::DB:
                v = std::polar(std::pow(10.0, nums[1] / 20.0), nums[2] * kPi / 180.0);
                break;
        }
        if (!sweep.freqs.empty() && f <= sweep.freqs.back())
            throw ValidationError("touchstone line " + std::to_string(lineno) +
                                  ": non-monotonic frequency");
        sweep.freqs.push_back(f);
        sweep.values.push_back(v);
    }
    sweep.z0 = z0;
    validate_sweep(sweep);
    return sweep;
}

OnePortSweep read_touchstone(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open touchstone file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return read_touchstone_from_string(ss.str());
}

std::string touchstone_to_string(const OnePortSweep& sweep, FrequencyUnit unit,
                                 TouchstoneFormat fmt) {
    if (sweep.kind != SweepKind::S11)
        throw ValidationError("write_touchstone expects a kind-S11 sweep");
    std::ostringstream out;
    char buf[128];
    const char* fmtname = fmt == TouchstoneFormat::RI ? "RI"
                          : fmt == TouchstoneFormat::MA ? "MA" : "DB";
    std::snprintf(buf, sizeof(buf), "# %s S %s R %.17g\n", unit_name(unit), fmtname, sweep.z0);
    out << buf;
    const double scale = unit_scale(unit);
    for (size_t i = 0; i < sweep.freqs.size(); ++i) {
        const cxd v = sweep.values[i];
        double a, b;
        switch (fmt) {
            case TouchstoneFormat::RI: a = v.real(); b = v.imag(); break;
            case TouchstoneFormat::MA: a = std::abs(v); b = std::arg(v) * 180.0 / kPi; break;
            default: a = 20.0 * std::log10(std::abs(v)); b = std::arg(v) * 180.0 / kPi; break;
        }
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", sweep.freqs[i] / scale, a, b);
        out << buf;
    }
    return out.str();
}

void write_touchstone(const OnePortSweep& sweep, const std::string& path, FrequencyUnit unit,
                      TouchstoneFormat fmt) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write touchstone file '" + path + "'");
    out << touchstone_to_string(sweep, unit, fmt);
}

std::string sweep_to_csv(const OnePortSweep& sweep) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# kind=%s z0=%.17g\n",
                  sweep.kind == SweepKind::Y ? "Y" : "S11", sweep.z0);
    out << buf << "freq_hz,re,im\n";
    for (size_t i = 0; i < sweep.freqs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", sweep.freqs[i],
                      sweep.values[i].real(), sweep.values[i].imag());
        out << buf;
    }
    return out.str();
}

OnePortSweep sweep_from_csv(const std::string& text) {
    OnePortSweep sweep;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("kind=S11") != std::string::npos) sweep.kind = SweepKind::S11;
            else if (line.find("kind=Y") != std::string::npos) sweep.kind = SweepKind::Y;
            else throw ValidationError("sweep CSV: header must carry kind=Y or kind=S11");
            if (auto pos = line.find("z0="); pos != std::string::npos)
                sweep.z0 = std::strtod(line.c_str() + pos + 3, nullptr);
            header_seen = true;
            continue;
        }
        if (line.rfind("freq_hz", 0) == 0) continue;
        double f, re, im;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &f, &re, &im) != 3)
            throw ValidationError("sweep CSV: malformed row '" + line + "'");
        sweep.freqs.push_back(f);
        sweep.values.emplace_back(re, im);
    }
    if (!header_seen)
        throw ValidationError("sweep CSV: missing '# kind=... z0=...' header");
    validate_sweep(sweep);
    return sweep;
}

}  // namespace sawstack
