#include "sawstack/dispersion.hpp"
#include "sawstack/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>

namespace sawstack {

using nlohmann::json;
using cxd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;

static constexpr double kEps0 = 8.8541878128e-12;  // F/m

void validate_stack(const LayerStack& stack) {
    validate_material(stack.substrate);
    for (const auto& [mat, h] : stack.layers) {
        validate_material(mat);
        if (!(h > 0.0))
            throw ValidationError("layer '" + mat.name + "': thickness must be positive");
    }
    const double norm = stack.propagation_direction.norm();
    if (!(norm > 0.0))
        throw ValidationError("propagation direction must be nonzero");
    if (std::abs(stack.propagation_direction[2]) > 1e-9 * norm)
        throw ValidationError("propagation direction must be in-plane (z component 0)");
}

LayerStack load_stack_from_string(const std::string& text, const MaterialDb& db) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("stack config parse failure: ") + ex.what());
    }
    LayerStack stack;
    if (!doc.contains("substrate") || !doc["substrate"].is_string())
        throw ValidationError("stack config missing 'substrate'");
    auto resolve = [&db](const std::string& name) {
        const MaterialTensorSet& m = db.get(name);
        if (m.orientation.isZero()) return m;
        return rotate_material(m, m.orientation);
    };
    stack.substrate = resolve(doc["substrate"].get<std::string>());
    for (const auto& j : doc.value("layers", json::array())) {
        if (!j.contains("material") || !j.contains("thickness_m"))
            throw ValidationError("stack layer needs 'material' and 'thickness_m'");
        stack.layers.emplace_back(resolve(j["material"].get<std::string>()),
                                  j["thickness_m"].get<double>());
    }
    const std::string bc = doc.value("surface_bc", "free");
    if (bc == "free")
        stack.surface_bc = SurfaceBc::free;
    else if (bc == "metallized")
        stack.surface_bc = SurfaceBc::metallized;
    else
        throw ValidationError("surface_bc must be 'free' or 'metallized'");
    if (doc.contains("direction")) {
        const auto& d = doc["direction"];
        if (!d.is_array() || d.size() != 3)
            throw ValidationError("direction must hold 3 numbers");
        for (int i = 0; i < 3; ++i) stack.propagation_direction[i] = d[i].get<double>();
    }
    validate_stack(stack);
    return stack;
}

LayerStack load_stack(const std::string& path, const MaterialDb& db) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open stack config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_stack_from_string(ss.str(), db);
}

std::string to_string(ModeLabel label) {
    switch (label) {
        case ModeLabel::Rayleigh: return "Rayleigh";
        case ModeLabel::Sezawa: return "Sezawa";
        default: return "higher";
    }
}

double coupling_dvv(double v_free, double v_metal) {
    if (!(v_metal > 0.0) || v_metal > v_free)
        throw ValidationError("coupling_dvv requires 0 < v_metal <= v_free (mis-paired modes?)");
    return 2.0 * (v_free - v_metal) / v_free;
}

// ---------------------------------------------------------------------------
// Internal layered solver. Works on nondimensionalized tensors so that all
// state-vector blocks are O(1): c' = c/c_ref, e' = e/sqrt(c_ref eps_ref),
// eps' = eps/eps_ref, with the potential dof rescaled consistently.
// ---------------------------------------------------------------------------
namespace {

struct FullTensors {
    double rho = 0.0;
    double c[3][3][3][3];
    double e[3][3][3];
    Eigen::Matrix3d eps;
    bool piezo = false;
};

FullTensors expand(const MaterialTensorSet& m, double c_ref, double e_ref, double eps_ref,
                   double rho_ref) {
    FullTensors t;
    t.rho = m.density / rho_ref;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) t.c[i][j][k][l] = m.c(i, j, k, l) / c_ref;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) t.e[i][k][l] = m.e(i, k, l) / e_ref;
    t.eps = m.permittivity / eps_ref;
    t.piezo = m.kind == MaterialKind::piezoelectric;
    return t;
}

// Extended 4x4 bilinear block M(a,b): mechanical rows/cols 0..2, potential 3.
Eigen::Matrix4d ext_block(const FullTensors& m, const Eigen::Vector3d& a,
                          const Eigen::Vector3d& b) {
    Eigen::Matrix4d out = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            double s = 0;
            for (int j = 0; j < 3; ++j)
                for (int l = 0; l < 3; ++l) s += m.c[i][j][k][l] * a[j] * b[l];
            out(i, k) = s;
        }
    for (int i = 0; i < 3; ++i) {
        double s1 = 0, s2 = 0;
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) {
                s1 += m.e[k][i][j] * b[k] * a[j];  // row force, col potential
                s2 += m.e[j][i][k] * a[j] * b[k];  // row charge, col displacement
            }
        out(i, 3) = s1;
        out(3, i) = s2;
    }
    out(3, 3) = -a.dot(m.eps * b);
    return out;
}

struct StrohDecomp {
    VectorXcd alpha;  // 2n eigenvalues
    MatrixXcd A;      // n x 2n displacement parts
    MatrixXcd L;      // n x 2n traction parts
};

struct LayerWaves {
    MatrixXcd Au, Ad, Lu, Ld;
    VectorXcd au, ad;
    VectorXcd Eu, Ed;  // referenced exponentials, |.| <= 1
};

class StackSolver {
public:
    StackSolver(const LayerStack& stack, SurfaceBc bc) : bc_(bc) {
        validate_stack(stack);
        // rotate tensors so the propagation direction becomes +x
        Eigen::Vector3d dir = stack.propagation_direction.normalized();
        const double phi = std::atan2(dir[1], dir[0]);
        Eigen::Matrix3d rot;
        rot << std::cos(phi), std::sin(phi), 0, -std::sin(phi), std::cos(phi), 0, 0, 0, 1;
        MaterialTensorSet sub = rotate_material(stack.substrate, rot);
        std::vector<std::pair<MaterialTensorSet, double>> layers;
        for (const auto& [m, h] : stack.layers) layers.emplace_back(rotate_material(m, rot), h);

        c_ref_ = sub.stiffness.cwiseAbs().maxCoeff();
        rho_ref_ = sub.density;
        eps_ref_ = sub.permittivity.cwiseAbs().maxCoeff();
        for (const auto& [m, h] : layers)
            eps_ref_ = std::max(eps_ref_, m.permittivity.cwiseAbs().maxCoeff());
        e_ref_ = std::sqrt(c_ref_ * eps_ref_);
        v_ref_ = std::sqrt(c_ref_ / rho_ref_);
        eps0_scaled_ = kEps0 / eps_ref_;

        sub_ = expand(sub, c_ref_, e_ref_, eps_ref_, rho_ref_);
        for (const auto& [m, h] : layers)
            layers_.emplace_back(expand(m, c_ref_, e_ref_, eps_ref_, rho_ref_), h);

        vmax_ = bulk_velocities(sub, Eigen::Vector3d::UnitX())[2];

        // keep only the sagittal dofs (u1, u3, phi) when u2 decouples in
        // every material; otherwise solve the full 4-dof system
        dofs_ = {0, 2, 3};
        if (!all_sh_decoupled()) dofs_ = {0, 1, 2, 3};
        n_ = static_cast<int>(dofs_.size());
    }

    double subsonic_limit() const { return vmax_; }
    int dof_count() const { return n_; }

    double indicator(double v, double wavelength) const {
        if (!(wavelength > 0.0))
            throw ValidationError("wavelength must be positive");
        if (!(v > 0.0) || v >= vmax_)
            throw ValidationError("trial velocity outside the subsonic window");
        MatrixXcd s = chain(v, wavelength, nullptr);
        const double d = bc_determinant(s);
        if (!std::isfinite(d))
            throw DegenerateEvaluation("evaluation point degenerate (non-finite indicator)");
        return d;
    }

    // Everything needed to reconstruct fields after a root is found.
    struct ChainData {
        MatrixXcd sub_Adn, sub_Ldn;
        VectorXcd sub_alpha;
        std::vector<MatrixXcd> s_below;  // surface stiffness below each layer
        std::vector<LayerWaves> waves;
        std::vector<Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>> k11, k12,
            k21, k22;
    };

    DepthProfile profile(double v, double wavelength, const SearchConfig& cfg) const;

private:
    bool all_sh_decoupled() const {
        auto check = [](const FullTensors& m) {
            const Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
            const Eigen::Vector3d e3 = Eigen::Vector3d::UnitZ();
            const int sag[3] = {0, 2, 3};
            for (const auto& [a, b] : {std::pair{e1, e1}, {e1, e3}, {e3, e3}}) {
                Eigen::Matrix4d blk = ext_block(m, a, b);
                const double scale = blk.cwiseAbs().maxCoeff();
                for (int s : sag)
                    if (std::abs(blk(s, 1)) > 1e-10 * scale || std::abs(blk(1, s)) > 1e-10 * scale)
                        return false;
            }
            return true;
        };
        if (!check(sub_)) return false;
        for (const auto& [m, h] : layers_)
            if (!check(m)) return false;
        return true;
    }

    MatrixXd reduced(const Eigen::Matrix4d& blk) const {
        MatrixXd out(n_, n_);
        for (int r = 0; r < n_; ++r)
            for (int c = 0; c < n_; ++c) out(r, c) = blk(dofs_[r], dofs_[c]);
        return out;
    }

    StrohDecomp stroh(const FullTensors& m, double v_scaled) const {
        const Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
        const Eigen::Vector3d e3 = Eigen::Vector3d::UnitZ();
        MatrixXd Q = reduced(ext_block(m, e1, e1));
        MatrixXd R = reduced(ext_block(m, e1, e3));
        MatrixXd T = reduced(ext_block(m, e3, e3));
        for (int r = 0; r < n_; ++r)
            if (dofs_[r] < 3) Q(r, r) -= m.rho * v_scaled * v_scaled;

        MatrixXd Tinv = T.inverse();
        MatrixXd N(2 * n_, 2 * n_);
        N.topLeftCorner(n_, n_) = -Tinv * R.transpose();
        N.topRightCorner(n_, n_) = Tinv;
        N.bottomLeftCorner(n_, n_) = R * Tinv * R.transpose() - Q;
        N.bottomRightCorner(n_, n_) = -R * Tinv;

        Eigen::EigenSolver<MatrixXd> es(N);
        if (es.info() != Eigen::Success)
            throw DegenerateEvaluation("evaluation point degenerate (eigensolver failure)");
        StrohDecomp d;
        d.alpha = es.eigenvalues();
        MatrixXcd V = es.eigenvectors();
        d.A = V.topRows(n_);
        d.L = V.bottomRows(n_);
        return d;
    }

    // substrate: keep the n partial waves decaying as z -> -infinity
    void substrate_waves(double v_scaled, MatrixXcd& Adn, MatrixXcd& Ldn,
                         VectorXcd* alpha_out) const {
        StrohDecomp d = stroh(sub_, v_scaled);
        std::vector<int> dn;
        for (int i = 0; i < 2 * n_; ++i)
            if (d.alpha[i].imag() < 0) dn.push_back(i);
        if (static_cast<int>(dn.size()) != n_)
            throw DegenerateEvaluation("evaluation point degenerate (substrate partition)");
        Adn.resize(n_, n_);
        Ldn.resize(n_, n_);
        if (alpha_out) alpha_out->resize(n_);
        for (int c = 0; c < n_; ++c) {
            Adn.col(c) = d.A.col(dn[c]);
            Ldn.col(c) = d.L.col(dn[c]);
            if (alpha_out) (*alpha_out)[c] = d.alpha[dn[c]];
        }
    }

    LayerWaves layer_waves(const FullTensors& m, double v_scaled, double k, double h) const {
        StrohDecomp d = stroh(m, v_scaled);
        double scale = 1.0;
        for (int i = 0; i < 2 * n_; ++i) scale = std::max(scale, std::abs(d.alpha[i]));
        std::vector<int> up, dn, re;
        for (int i = 0; i < 2 * n_; ++i) {
            if (d.alpha[i].imag() > 1e-8 * scale)
                up.push_back(i);
            else if (d.alpha[i].imag() < -1e-8 * scale)
                dn.push_back(i);
            else
                re.push_back(i);
        }
        // real eigenvalues: any balanced split keeps the exponentials bounded
        std::sort(re.begin(), re.end(),
                  [&](int a, int b) { return d.alpha[a].real() > d.alpha[b].real(); });
        for (int i : re) {
            if (static_cast<int>(up.size()) < n_)
                up.push_back(i);
            else
                dn.push_back(i);
        }
        if (static_cast<int>(up.size()) != n_ || static_cast<int>(dn.size()) != n_)
            throw DegenerateEvaluation("evaluation point degenerate (layer partition)");

        LayerWaves w;
        w.Au.resize(n_, n_); w.Ad.resize(n_, n_);
        w.Lu.resize(n_, n_); w.Ld.resize(n_, n_);
        w.au.resize(n_); w.ad.resize(n_);
        w.Eu.resize(n_); w.Ed.resize(n_);
        const cxd ik(0.0, k);
        for (int c = 0; c < n_; ++c) {
            w.Au.col(c) = d.A.col(up[c]);
            w.Lu.col(c) = d.L.col(up[c]);
            w.au[c] = d.alpha[up[c]];
            w.Eu[c] = std::exp(ik * w.au[c] * h);
            w.Ad.col(c) = d.A.col(dn[c]);
            w.Ld.col(c) = d.L.col(dn[c]);
            w.ad[c] = d.alpha[dn[c]];
            w.Ed[c] = std::exp(-ik * w.ad[c] * h);
        }
        return w;
    }

    // two-face stiffness blocks of one layer
    void layer_stiffness(const LayerWaves& w, MatrixXcd& K11, MatrixXcd& K12, MatrixXcd& K21,
                         MatrixXcd& K22, MatrixXcd* Mfaces) const {
        MatrixXcd M(2 * n_, 2 * n_), G(2 * n_, 2 * n_);
        M.topLeftCorner(n_, n_) = w.Au;
        M.topRightCorner(n_, n_) = w.Ad * w.Ed.asDiagonal();
        M.bottomLeftCorner(n_, n_) = w.Au * w.Eu.asDiagonal();
        M.bottomRightCorner(n_, n_) = w.Ad;
        G.topLeftCorner(n_, n_) = w.Lu;
        G.topRightCorner(n_, n_) = w.Ld * w.Ed.asDiagonal();
        G.bottomLeftCorner(n_, n_) = w.Lu * w.Eu.asDiagonal();
        G.bottomRightCorner(n_, n_) = w.Ld;
        MatrixXcd K = G * M.inverse();
        K11 = K.topLeftCorner(n_, n_);
        K12 = K.topRightCorner(n_, n_);
        K21 = K.bottomLeftCorner(n_, n_);
        K22 = K.bottomRightCorner(n_, n_);
        if (Mfaces) *Mfaces = M;
    }

    // surface stiffness at the top of the stack (recursive scheme)
    MatrixXcd chain(double v, double wavelength, ChainData* data) const {
        const double vs = v / v_ref_;
        const double k = 2.0 * M_PI / wavelength;
        MatrixXcd Adn, Ldn;
        VectorXcd alpha_sub;
        substrate_waves(vs, Adn, Ldn, data ? &alpha_sub : nullptr);
        MatrixXcd s = Ldn * Adn.inverse();
        if (data) {
            data->sub_Adn = Adn;
            data->sub_Ldn = Ldn;
            data->sub_alpha = alpha_sub;
        }
        for (const auto& [m, h] : layers_) {
            LayerWaves w = layer_waves(m, vs, k, h);
            MatrixXcd K11, K12, K21, K22, Mfaces;
            layer_stiffness(w, K11, K12, K21, K22, data ? &Mfaces : nullptr);
            if (data) {
                data->s_below.push_back(s);
                data->waves.push_back(w);
                data->k11.push_back(K11);
                data->k12.push_back(K12);
                data->k21.push_back(K21);
                data->k22.push_back(K22);
            }
            s = K21 * (s - K11).inverse() * K12 + K22;
        }
        return s;
    }

    // real indicator: det of the Hermitian part of -i K_eff, row-normalized.
    // For lossless media in the subsonic window -i K_eff is Hermitian up to
    // rounding, so the determinant is real and changes sign through modes.
    double bc_determinant(const MatrixXcd& s) const {
        const int phi = n_ - 1;  // potential dof is last in both layouts
        MatrixXcd keff;
        if (bc_ == SurfaceBc::metallized) {
            keff = s.topLeftCorner(phi, phi);
        } else {
            keff = s;
            keff(phi, phi) += cxd(0.0, eps0_scaled_);
        }
        MatrixXcd h = cxd(0.0, -1.0) * keff;
        MatrixXcd hh = 0.5 * (h + h.adjoint());
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hh, Eigen::EigenvaluesOnly);
        double det = 1.0;
        for (int i = 0; i < hh.rows(); ++i) {
            double rn = hh.row(i).norm();
            if (rn == 0.0) rn = 1.0;
            det *= es.eigenvalues()[i] / rn;
        }
        return det;
    }

    SurfaceBc bc_;
    std::vector<int> dofs_;
    int n_ = 3;
    FullTensors sub_;
    std::vector<std::pair<FullTensors, double>> layers_;
    double c_ref_ = 0, rho_ref_ = 0, eps_ref_ = 0, e_ref_ = 0, v_ref_ = 0;
    double eps0_scaled_ = 0;
    double vmax_ = 0;

    friend DepthProfile solver_profile(const StackSolver&, double, double, const SearchConfig&);
};

// reconstruct the mode shape by back-substituting through the stored chain
DepthProfile solver_profile(const StackSolver& sol, double v, double wavelength,
                            const SearchConfig& cfg) {
    const int n = sol.n_;
    const int phi = n - 1;
    StackSolver::ChainData data;
    MatrixXcd s = sol.chain(v, wavelength, &data);

    // null vector of the boundary-condition matrix
    MatrixXcd keff;
    if (sol.bc_ == SurfaceBc::metallized) {
        keff = s.topLeftCorner(phi, phi);
    } else {
        keff = s;
        keff(phi, phi) += cxd(0.0, sol.eps0_scaled_);
    }
    MatrixXcd hh = cxd(0.0, -1.0) * keff;
    hh = 0.5 * (hh + hh.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hh);
    int imin = 0;
    for (int i = 1; i < hh.rows(); ++i)
        if (std::abs(es.eigenvalues()[i]) < std::abs(es.eigenvalues()[imin])) imin = i;
    VectorXcd u_top = VectorXcd::Zero(n);
    if (sol.bc_ == SurfaceBc::metallized)
        u_top.head(phi) = es.eigenvectors().col(imin);
    else
        u_top = es.eigenvectors().col(imin);

    const double k = 2.0 * M_PI / wavelength;
    const cxd ik(0.0, k);
    const size_t nlayers = sol.layers_.size();

    // interface displacement vectors, bottom of each layer
    std::vector<VectorXcd> u_bottom(nlayers);
    VectorXcd ut = u_top;
    for (size_t l = nlayers; l-- > 0;) {
        VectorXcd ub = (data.s_below[l] - data.k11[l]).fullPivLu().solve(data.k12[l] * ut);
        u_bottom[l] = ub;
        ut = ub;
    }

    DepthProfile prof;
    const int np = std::max(cfg.profile_points, 16);
    double total_h = 0;
    for (const auto& [m, h] : sol.layers_) total_h += h;
    const double z_lo = -cfg.profile_depth_wavelengths * wavelength;
    const int nsub = np / 2 + 1;

    // substrate samples (z < 0)
    VectorXcd w_sub = data.sub_Adn.fullPivLu().solve(nlayers ? u_bottom[0] : u_top);
    for (int i = 0; i < nsub; ++i) {
        const double z = z_lo + (0.0 - z_lo) * i / nsub;
        VectorXcd f = VectorXcd::Zero(n);
        for (int c = 0; c < n; ++c)
            f += data.sub_Adn.col(c) * (w_sub[c] * std::exp(ik * data.sub_alpha[c] * z));
        std::array<double, 4> mag{0, 0, 0, 0};
        for (int c = 0; c < n; ++c) mag[static_cast<size_t>(sol.dofs_[c])] = std::abs(f[c]);
        prof.z.push_back(z);
        prof.magnitude.push_back(mag);
    }

    // layer samples
    double z_b = 0.0;
    for (size_t l = 0; l < nlayers; ++l) {
        const double h = sol.layers_[l].second;
        const double z_t = z_b + h;
        const LayerWaves& w = data.waves[l];
        MatrixXcd M(2 * n, 2 * n);
        M.topLeftCorner(n, n) = w.Au;
        M.topRightCorner(n, n) = w.Ad * w.Ed.asDiagonal();
        M.bottomLeftCorner(n, n) = w.Au * w.Eu.asDiagonal();
        M.bottomRightCorner(n, n) = w.Ad;
        VectorXcd rhs(2 * n);
        rhs.head(n) = u_bottom[l];
        rhs.tail(n) = (l + 1 < nlayers) ? u_bottom[l + 1] : u_top;
        VectorXcd wv = M.fullPivLu().solve(rhs);
        const int nl = std::max(4, static_cast<int>(np * (h / std::max(total_h, h))));
        for (int i = 1; i <= nl; ++i) {
            const double z = z_b + h * i / nl;
            VectorXcd f = VectorXcd::Zero(n);
            for (int c = 0; c < n; ++c) {
                f += w.Au.col(c) * (wv[c] * std::exp(ik * w.au[c] * (z - z_b)));
                f += w.Ad.col(c) * (wv[n + c] * std::exp(ik * w.ad[c] * (z - z_t)));
            }
            std::array<double, 4> mag{0, 0, 0, 0};
            for (int c = 0; c < n; ++c) mag[static_cast<size_t>(sol.dofs_[c])] = std::abs(f[c]);
            prof.z.push_back(z);
            prof.magnitude.push_back(mag);
        }
        z_b = z_t;
    }

    // normalize displacements by the peak displacement, potential separately
    double umax = 0, pmax = 0;
    for (const auto& m : prof.magnitude) {
        umax = std::max({umax, m[0], m[1], m[2]});
        pmax = std::max(pmax, m[3]);
    }
    for (auto& m : prof.magnitude) {
        if (umax > 0) { m[0] /= umax; m[1] /= umax; m[2] /= umax; }
        if (pmax > 0) m[3] /= pmax;
    }
    return prof;
}

DepthProfile StackSolver::profile(double v, double wavelength, const SearchConfig& cfg) const {
    return solver_profile(*this, v, wavelength, cfg);
}

double eval_stepping_degenerate(const StackSolver& sol, double& v, double wavelength) {
    try {
        return sol.indicator(v, wavelength);
    } catch (const DegenerateEvaluation&) {
        v *= 1.0 + 1e-6;  // isolated point: step over it
        return sol.indicator(v, wavelength);
    }
}

}  // namespace

double subsonic_limit(const LayerStack& stack) {
    StackSolver sol(stack, stack.surface_bc);
    return sol.subsonic_limit();
}

double boundary_determinant(const LayerStack& stack, double v, double wavelength) {
    StackSolver sol(stack, stack.surface_bc);
    return sol.indicator(v, wavelength);
}

std::vector<GuidedMode> find_guided_modes(const LayerStack& stack, double wavelength,
                                          const SearchConfig& config) {
    if (!(wavelength > 0.0))
        throw ValidationError("wavelength must be positive");
    StackSolver sol(stack, stack.surface_bc);
    const double vmax = sol.subsonic_limit();
    const double lo = vmax * 1e-3;
    const double hi = vmax * (1.0 - 1e-6);
    const int npts = std::max(config.scan_points, 16);

    std::vector<double> vs(npts), dets(npts);
    for (int i = 0; i < npts; ++i) {
        double v = lo + (hi - lo) * i / (npts - 1);
        double d;
        try {
            d = eval_stepping_degenerate(sol, v, wavelength);
        } catch (const SolverError&) {
            d = std::numeric_limits<double>::quiet_NaN();
        }
        vs[i] = v;
        dets[i] = d;
    }

    std::vector<GuidedMode> modes;
    for (int i = 0; i + 1 < npts; ++i) {
        const double a = dets[i], b = dets[i + 1];
        if (std::isnan(a) || std::isnan(b) || a * b >= 0.0) continue;

        double vlo = vs[i], vhi = vs[i + 1], flo = a;
        int iter = 0;
        while (vhi - vlo > config.rel_tol * vhi) {
            if (++iter > 200)
                throw SolverError("root refinement did not converge in bracket [" +
                                  std::to_string(vlo) + ", " + std::to_string(vhi) + "] m/s");
            double mid = 0.5 * (vlo + vhi);
            double fm;
            try {
                fm = eval_stepping_degenerate(sol, mid, wavelength);
            } catch (const SolverError&) {
                mid = std::nextafter(mid, vhi);
                fm = sol.indicator(mid, wavelength);
            }
            if (flo * fm <= 0.0)
                vhi = mid;
            else {
                vlo = mid;
                flo = fm;
            }
        }
        double root = 0.5 * (vlo + vhi);
        double resid;
        try {
            resid = std::abs(eval_stepping_degenerate(sol, root, wavelength));
        } catch (const SolverError&) {
            continue;
        }
        // sign changes at poles of the stiffness recursion converge with a
        // large residual; only true boundary-determinant zeros pass
        if (!(resid < config.residual_accept)) continue;

        GuidedMode m;
        m.phase_velocity = root;
        m.residual = resid;
        modes.push_back(std::move(m));
    }

    std::sort(modes.begin(), modes.end(),
              [](const GuidedMode& x, const GuidedMode& y) { return x.phase_velocity < y.phase_velocity; });
    for (size_t i = 0; i < modes.size(); ++i) {
        modes[i].mode_index = static_cast<int>(i);
        modes[i].label = i == 0 ? ModeLabel::Rayleigh
                                : (i == 1 ? ModeLabel::Sezawa : ModeLabel::higher);
        if (config.compute_profiles)
            modes[i].depth_profile = sol.profile(modes[i].phase_velocity, wavelength, config);
    }
    return modes;
}

BranchSweepResult solve_branches(const LayerStack& stack_template, double film_thickness,
                                 const std::vector<double>& grid, const SearchConfig& config) {
    if (!(film_thickness > 0.0))
        throw ValidationError("film thickness must be positive");
    if (grid.empty())
        throw ValidationError("h_over_lambda grid is empty");
    for (size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || grid[i] > 2.0)
            throw ValidationError("h_over_lambda values must lie in (0, 2]");
        if (i > 0 && grid[i] <= grid[i - 1])
            throw ValidationError("h_over_lambda grid must be strictly increasing");
    }

    SearchConfig cfg = config;
    cfg.compute_profiles = false;

    BranchSweepResult result;
    auto& branches = result.branches;
    for (double r : grid) {
        const double lambda = film_thickness / r;
        std::vector<GuidedMode> free_modes, metal_modes;
        try {
            LayerStack s = stack_template;
            s.surface_bc = SurfaceBc::free;
            free_modes = find_guided_modes(s, lambda, cfg);
            s.surface_bc = SurfaceBc::metallized;
            metal_modes = find_guided_modes(s, lambda, cfg);
        } catch (const std::exception& ex) {
            result.failures.push_back({r, ex.what()});
            continue;
        }
        const size_t npairs = std::min(free_modes.size(), metal_modes.size());
        for (size_t i = 0; i < npairs; ++i) {
            const double vf = free_modes[i].phase_velocity;
            const double vm = metal_modes[i].phase_velocity;
            if (vm > vf * (1.0 + 1e-9)) {
                result.failures.push_back(
                    {r, "mode " + std::to_string(i) + ": v_metal exceeds v_free (mis-paired)"});
                continue;
            }
            while (branches.size() <= i) {
                DispersionBranch b;
                b.mode_index = static_cast<int>(branches.size());
                b.label = branches.empty() ? ModeLabel::Rayleigh
                                           : (branches.size() == 1 ? ModeLabel::Sezawa
                                                                   : ModeLabel::higher);
                branches.push_back(std::move(b));
            }
            DispersionPoint p;
            p.h_over_lambda = r;
            p.wavelength = lambda;
            p.v_free = vf;
            p.v_metal = std::min(vm, vf);
            p.k2_dvv = coupling_dvv(vf, p.v_metal);
            p.label = branches[i].label;
            branches[i].points.push_back(p);
        }
    }
    return result;
}

std::string branches_to_csv(const BranchSweepResult& result) {
    std::ostringstream out;
    out << "h_over_lambda,wavelength_m,label,v_free,v_metal,k2_dvv\n";
    char buf[160];
    for (const auto& b : result.branches) {
        for (const auto& p : b.points) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%s,%.17g,%.17g,%.17g\n",
                          p.h_over_lambda, p.wavelength, to_string(p.label).c_str(), p.v_free,
                          p.v_metal, p.k2_dvv);
            out << buf;
        }
    }
    return out.str();
}

}  // namespace sawstack
