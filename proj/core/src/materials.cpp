#include "sawstack/materials.hpp"
#include "sawstack/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace sawstack {

using nlohmann::json;

double MaterialTensorSet::c(int i, int j, int k, int l) const {
    return stiffness(voigt::index(i, j), voigt::index(k, l));
}

double MaterialTensorSet::e(int i, int k, int l) const {
    return piezo(i, voigt::index(k, l));
}

namespace {

bool symmetric(const Eigen::MatrixXd& m, double rtol) {
    const double scale = m.cwiseAbs().maxCoeff();
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rtol * std::max(scale, 1e-300);
}

bool positive_definite(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

void validate_material(const MaterialTensorSet& mat) {
    const std::string who = "material '" + mat.name + "': ";
    if (!(mat.density > 0.0))
        throw ValidationError(who + "density must be positive");
    if (!symmetric(mat.stiffness, 1e-9))
        throw ValidationError(who + "stiffness not symmetric");
    if (!positive_definite(mat.stiffness))
        throw ValidationError(who + "stiffness not positive definite");
    if (!symmetric(mat.permittivity, 1e-9))
        throw ValidationError(who + "permittivity not symmetric");
    if (!positive_definite(mat.permittivity))
        throw ValidationError(who + "permittivity not positive definite");
    if (mat.kind == MaterialKind::elastic && mat.piezo.cwiseAbs().maxCoeff() != 0.0)
        throw ValidationError(who + "elastic material has nonzero piezo entries");
}

const MaterialTensorSet& MaterialDb::get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end())
        throw ValidationError("unknown material '" + name + "'");
    return it->second;
}

namespace {

template <typename M>
void fill_matrix(M& out, const json& arr, size_t rows, size_t cols,
                 const std::string& who, const std::string& field) {
    if (!arr.is_array() || arr.size() != rows * cols)
        throw ValidationError(who + field + " must hold " + std::to_string(rows * cols) +
                              " numbers, row-major");
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c)
            out(static_cast<int>(r), static_cast<int>(c)) = arr[r * cols + c].get<double>();
}

MaterialTensorSet parse_entry(const json& j) {
    MaterialTensorSet m;
    if (!j.contains("name") || !j["name"].is_string())
        throw ValidationError("material entry missing 'name'");
    m.name = j["name"].get<std::string>();
    const std::string who = "material '" + m.name + "': ";

    const std::string kind = j.value("kind", "");
    if (kind == "piezoelectric")
        m.kind = MaterialKind::piezoelectric;
    else if (kind == "elastic")
        m.kind = MaterialKind::elastic;
    else
        throw ValidationError(who + "kind must be 'piezoelectric' or 'elastic'");

    if (!j.contains("density"))
        throw ValidationError(who + "missing 'density'");
    m.density = j["density"].get<double>();

    if (!j.contains("stiffness"))
        throw ValidationError(who + "missing 'stiffness'");
    fill_matrix(m.stiffness, j["stiffness"], 6, 6, who, "stiffness");

    m.piezo.setZero();
    if (m.kind == MaterialKind::piezoelectric) {
        if (!j.contains("piezo"))
            throw ValidationError(who + "piezoelectric entry missing 'piezo'");
        fill_matrix(m.piezo, j["piezo"], 3, 6, who, "piezo");
    } else if (j.contains("piezo")) {
        fill_matrix(m.piezo, j["piezo"], 3, 6, who, "piezo");
    }

    if (!j.contains("permittivity"))
        throw ValidationError(who + "missing 'permittivity'");
    fill_matrix(m.permittivity, j["permittivity"], 3, 3, who, "permittivity");

    if (j.contains("euler")) {
        const auto& e = j["euler"];
        if (!e.is_array() || e.size() != 3)
            throw ValidationError(who + "euler must hold 3 angles (radians)");
        for (int i = 0; i < 3; ++i) m.orientation[i] = e[i].get<double>();
    }
    return m;
}

}  // namespace

MaterialDb load_materials_from_string(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("material config parse failure: ") + ex.what());
    }
    if (!doc.is_object() || !doc.contains("materials") || !doc["materials"].is_array())
        throw ValidationError("material config must be an object with a 'materials' array");

    MaterialDb db;
    db.version = doc.value("version", 0);
    for (const auto& j : doc["materials"]) {
        MaterialTensorSet m = parse_entry(j);
        validate_material(m);
        if (db.entries.count(m.name))
            throw ValidationError("duplicate material name '" + m.name + "'");
        db.source[m.name] = j.value("source", "");
        db.entries.emplace(m.name, std::move(m));
    }
    return db;
}

MaterialDb load_materials(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open material config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_materials_from_string(ss.str());
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json arr = json::array();
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            arr.push_back(m(r, c));
    return arr;
}

}  // namespace

std::string serialize_materials(const MaterialDb& db) {
    json doc;
    doc["version"] = db.version;
    json mats = json::array();
    for (const auto& [name, m] : db.entries) {
        json j;
        j["name"] = name;
        j["kind"] = m.kind == MaterialKind::piezoelectric ? "piezoelectric" : "elastic";
        j["density"] = m.density;
        j["stiffness"] = matrix_to_json(m.stiffness);
        if (m.kind == MaterialKind::piezoelectric)
            j["piezo"] = matrix_to_json(m.piezo);
        j["permittivity"] = matrix_to_json(m.permittivity);
        j["euler"] = {m.orientation[0], m.orientation[1], m.orientation[2]};
        auto src = db.source.find(name);
        j["source"] = src == db.source.end() ? "" : src->second;
        mats.push_back(std::move(j));
    }
    doc["materials"] = std::move(mats);
    return doc.dump(2) + "\n";
}

void save_materials(const MaterialDb& db, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write material config '" + path + "'");
    out << serialize_materials(db);
}

Eigen::Matrix3d euler_zxz(const Eigen::Vector3d& euler) {
    const double a = euler[0], b = euler[1], c = euler[2];
    Eigen::Matrix3d rz1, rx, rz2;
    rz1 << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    rx << 1, 0, 0, 0, std::cos(b), -std::sin(b), 0, std::sin(b), std::cos(b);
    rz2 << std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c), 0, 0, 0, 1;
    return rz1 * rx * rz2;
}

MaterialTensorSet rotate_material(const MaterialTensorSet& mat, const Eigen::Matrix3d& rot) {
    MaterialTensorSet out = mat;
    out.orientation.setZero();

    // stiffness: rank 4
    double cf[3][3][3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    double s = 0;
                    for (int a = 0; a < 3; ++a)
                        for (int b = 0; b < 3; ++b)
                            for (int p = 0; p < 3; ++p)
                                for (int q = 0; q < 3; ++q)
                                    s += rot(i, a) * rot(j, b) * rot(k, p) * rot(l, q) *
                                         mat.c(a, b, p, q);
                    cf[i][j][k][l] = s;
                }
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = k; l < 3; ++l)
                    out.stiffness(voigt::index(i, j), voigt::index(k, l)) = cf[i][j][k][l];

    // piezo: rank 3
    double ef[3][3][3];
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) {
                double s = 0;
                for (int a = 0; a < 3; ++a)
                    for (int p = 0; p < 3; ++p)
                        for (int q = 0; q < 3; ++q)
                            s += rot(i, a) * rot(k, p) * rot(l, q) * mat.e(a, p, q);
                ef[i][k][l] = s;
            }
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            for (int l = k; l < 3; ++l)
                out.piezo(i, voigt::index(k, l)) = ef[i][k][l];

    out.permittivity = rot * mat.permittivity * rot.transpose();
    return out;
}

MaterialTensorSet rotate_material(const MaterialTensorSet& mat, const Eigen::Vector3d& euler) {
    return rotate_material(mat, euler_zxz(euler));
}

Eigen::Matrix3d christoffel_matrix(const MaterialTensorSet& mat, const Eigen::Vector3d& n) {
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            double s = 0;
            for (int j = 0; j < 3; ++j)
                for (int l = 0; l < 3; ++l)
                    s += mat.c(i, j, k, l) * n[j] * n[l];
            g(i, k) = s;
        }
    if (mat.kind == MaterialKind::piezoelectric) {
        Eigen::Vector3d gamma = Eigen::Vector3d::Zero();
        for (int i = 0; i < 3; ++i) {
            double s = 0;
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j)
                    s += mat.e(k, i, j) * n[k] * n[j];
            gamma[i] = s;
        }
        const double eps_n = n.dot(mat.permittivity * n);
        g += gamma * gamma.transpose() / eps_n;
    }
    return g;
}

std::array<double, 3> bulk_velocities(const MaterialTensorSet& mat, const Eigen::Vector3d& direction) {
    if (std::abs(direction.norm() - 1.0) > 1e-9)
        throw ValidationError("bulk_velocities: direction must be a unit vector");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(christoffel_matrix(mat, direction),
                                                      Eigen::EigenvaluesOnly);
    std::array<double, 3> v;
    for (int i = 0; i < 3; ++i)
        v[i] = std::sqrt(es.eigenvalues()[2 - i] / mat.density);  // descending
    return v;
}

}  // namespace sawstack
