#include "sawstack/sweep.hpp"
#include "sawstack/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sawstack {

using nlohmann::json;

std::vector<DesignRow> design_table(const std::vector<DispersionBranch>& branches,
                                    double film_thickness) {
    if (!(film_thickness > 0.0))
        throw ValidationError("design_table requires positive film thickness");
    std::vector<DesignRow> rows;
    for (const auto& b : branches) {
        for (const auto& p : b.points) {
            DesignRow row;
            row.h_over_lambda = p.h_over_lambda;
            row.label = b.label;
            row.v_p = p.v_free;
            row.fs = p.v_free * p.h_over_lambda / film_thickness;
            row.k2 = p.k2_dvv;
            row.source = RowSource::simulated;
            rows.push_back(row);
        }
    }
    // branches arrive ordered by mode index; keep (label, r) ordering
    return rows;
}

std::string design_table_to_csv(const std::vector<DesignRow>& rows) {
    std::ostringstream out;
    out << "h_over_lambda,label,fs_hz,v_p,k2,source\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%.17g,%s\n", r.h_over_lambda,
                      to_string(r.label).c_str(), r.fs, r.v_p, r.k2,
                      r.source == RowSource::simulated ? "simulated" : "measured");
        out << buf;
    }
    return out.str();
}

DriftReport compare_power_sweeps(const std::vector<OnePortSweep>& sweeps,
                                 const std::vector<double>& powers_dbm) {
    if (sweeps.empty())
        throw ValidationError("compare_power_sweeps: no sweeps");
    if (sweeps.size() != powers_dbm.size())
        throw ValidationError("compare_power_sweeps: sweep and power counts differ");
    for (size_t i = 1; i < sweeps.size(); ++i)
        if (sweeps[i].freqs != sweeps[0].freqs)
            throw ValidationError("compare_power_sweeps: sweeps must share one frequency grid");

    DriftReport report;
    report.powers_dbm = powers_dbm;
    for (size_t i = 0; i < sweeps.size(); ++i) {
        OnePortSweep y = sweeps[i].kind == SweepKind::S11 ? s11_to_y(sweeps[i]) : sweeps[i];
        ResonanceSet res;
        try {
            res = find_resonances(y);
        } catch (const SolverError& ex) {
            throw SolverError("sweep at " + std::to_string(powers_dbm[i]) + " dBm: " + ex.what());
        }
        // strongest admittance peak
        size_t best = 0;
        for (size_t k = 1; k < res.pairs.size(); ++k)
            if (res.peak_mag_db[k] > res.peak_mag_db[best]) best = k;
        report.fs_hz.push_back(res.pairs[best].fs);
        report.peak_mag_change_db.push_back(res.peak_mag_db[best]);
    }
    const double f0 = report.fs_hz[0];
    const double m0 = report.peak_mag_change_db[0];
    for (size_t i = 0; i < report.fs_hz.size(); ++i) {
        report.fs_shift_ppm.push_back((report.fs_hz[i] - f0) / f0 * 1e6);
        report.peak_mag_change_db[i] -= m0;
    }
    report.hysteresis_ppm = std::abs(report.fs_shift_ppm.back());
    return report;
}

std::string drift_report_to_json(const DriftReport& report) {
    json j;
    j["powers_dbm"] = report.powers_dbm;
    j["fs_hz"] = report.fs_hz;
    j["fs_shift_ppm"] = report.fs_shift_ppm;
    j["peak_mag_change_db"] = report.peak_mag_change_db;
    j["hysteresis_ppm"] = report.hysteresis_ppm;
    return j.dump(2) + "\n";
}

const std::vector<BenchmarkRow>& reference_benchmark_rows() {
    static const std::vector<BenchmarkRow> rows = {
        {"JMEMS'24", "AlScN SAW", "Sezawa", "SiC", 5.9, 5660.0, 4.0, 762.0},
        {"IEEE EDL'24", "AlScN SAW", "Sezawa", "SiC", 16.2, 6490.0, 4.0, 380.0},
        {"Jpn.J.Appl.Phys.'23", "AlScN SAW", "Sezawa", "Diamond", 3.73, 7460.0, 5.4, 311.0},
        {"IEEE IC-MAM'24", "LN SAW", "SH-SAW", "Si", 13.4, 3210.0, 7.0, 58.0},
        {"this work", "AlScN SAW", "Sezawa", "Diamond", 12.9, 8671.0, 2.1, 408.0},
    };
    return rows;
}

BenchmarkTable benchmark_table(const std::vector<BenchmarkRow>& entries, bool include_reference) {
    BenchmarkTable t;
    if (include_reference) t.rows = reference_benchmark_rows();
    for (const auto& e : entries) {
        if (e.reference.empty() || e.platform.empty() || e.mode.empty() || e.substrate.empty())
            throw ValidationError("benchmark entry missing a text field");
        if (!(e.fs_ghz > 0.0) || !(e.v_p > 0.0))
            throw ValidationError("benchmark entry '" + e.reference + "' missing fs or v_p");
        t.rows.push_back(e);
    }
    return t;
}

std::string benchmark_table_to_csv(const BenchmarkTable& table) {
    std::ostringstream out;
    out << "reference,platform,mode,substrate,fs_ghz,v_p,k2_percent,q_max\n";
    char buf[224];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%.17g,%.17g,%.17g,%.17g\n",
                      r.reference.c_str(), r.platform.c_str(), r.mode.c_str(),
                      r.substrate.c_str(), r.fs_ghz, r.v_p, r.k2_percent, r.q_max);
        out << buf;
    }
    return out.str();
}

std::string benchmark_table_to_text(const BenchmarkTable& table) {
    std::vector<std::array<std::string, 8>> cells;
    cells.push_back({"Ref.", "Platform", "Mode", "Substrate", "fs [GHz]", "v_p [m/s]",
                     "k_eff^2 [%]", "Q_max"});
    char buf[64];
    for (const auto& r : table.rows) {
        std::array<std::string, 8> row;
        row[0] = r.reference;
        row[1] = r.platform;
        row[2] = r.mode;
        row[3] = r.substrate;
        std::snprintf(buf, sizeof(buf), "%g", r.fs_ghz);
        row[4] = buf;
        std::snprintf(buf, sizeof(buf), "%g", r.v_p);
        row[5] = buf;
        std::snprintf(buf, sizeof(buf), "%g", r.k2_percent);
        row[6] = buf;
        std::snprintf(buf, sizeof(buf), "%g", r.q_max);
        row[7] = buf;
        cells.push_back(std::move(row));
    }
    std::array<size_t, 8> width{};
    for (const auto& row : cells)
        for (size_t c = 0; c < 8; ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream out;
    for (const auto& row : cells) {
        for (size_t c = 0; c < 8; ++c) {
            out << row[c];
            if (c + 1 < 8) out << std::string(width[c] - row[c].size() + 2, ' ');
        }
        out << '\n';
    }
    return out.str();
}

std::vector<BenchmarkRow> benchmark_rows_from_csv(const std::string& text) {
    std::vector<BenchmarkRow> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("reference,", 0) == 0) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 8)
            throw ValidationError("benchmark CSV row needs 8 fields: '" + line + "'");
        BenchmarkRow r;
        r.reference = f[0];
        r.platform = f[1];
        r.mode = f[2];
        r.substrate = f[3];
        try {
            r.fs_ghz = std::stod(f[4]);
            r.v_p = std::stod(f[5]);
            r.k2_percent = std::stod(f[6]);
            r.q_max = std::stod(f[7]);
        } catch (const std::exception&) {
            throw ValidationError("benchmark CSV row has a malformed number: '" + line + "'");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace sawstack
