#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <string>

namespace sawstack {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix36d = Eigen::Matrix<double, 3, 6>;

enum class MaterialKind { piezoelectric, elastic };

/// One material: density plus stiffness/piezoelectric/permittivity tensors
/// in Voigt form, SI units, with a Z-X-Z Euler orientation.
struct MaterialTensorSet {
    std::string name;
    MaterialKind kind = MaterialKind::elastic;
    double density = 0.0;            // kg/m^3
    Matrix6d stiffness;              // Pa
    Matrix36d piezo;                 // C/m^2, zero for elastic materials
    Eigen::Matrix3d permittivity;    // F/m
    Eigen::Vector3d orientation = Eigen::Vector3d::Zero();  // Z-X-Z Euler, rad

    // Full-tensor component access through Voigt indexing.
    double c(int i, int j, int k, int l) const;
    double e(int i, int k, int l) const;
};

// Throws ValidationError naming the failed invariant.
void validate_material(const MaterialTensorSet& mat);

struct MaterialDb {
    std::map<std::string, MaterialTensorSet> entries;
    std::map<std::string, std::string> source;  // provenance text per entry
    int version = 0;

    const MaterialTensorSet& get(const std::string& name) const;
};

MaterialDb load_materials(const std::string& path);
MaterialDb load_materials_from_string(const std::string& json_text);
std::string serialize_materials(const MaterialDb& db);
void save_materials(const MaterialDb& db, const std::string& path);

/// Z-X-Z Euler rotation matrix R = Rz(a) * Rx(b) * Rz(c).
Eigen::Matrix3d euler_zxz(const Eigen::Vector3d& euler);

/// Actively rotates all tensors by euler_zxz(euler); the result carries
/// orientation (0,0,0) since the rotation is baked into the tensors.
MaterialTensorSet rotate_material(const MaterialTensorSet& mat, const Eigen::Vector3d& euler);

/// Rotates by an explicit rotation matrix (rows = new basis in old coords).
MaterialTensorSet rotate_material(const MaterialTensorSet& mat, const Eigen::Matrix3d& rot);

/// Three bulk phase velocities along a unit direction, m/s, descending.
/// Piezoelectric materials use the stiffened Christoffel matrix.
std::array<double, 3> bulk_velocities(const MaterialTensorSet& mat, const Eigen::Vector3d& direction);

/// Stiffened Christoffel matrix (rho * v^2 eigenvalues) for a unit direction.
Eigen::Matrix3d christoffel_matrix(const MaterialTensorSet& mat, const Eigen::Vector3d& direction);

namespace voigt {
inline int index(int i, int j) {
    if (i == j) return i;
    const int s = i + j;
    if (s == 3) return 3;   // (1,2)
    if (s == 2) return 4;   // (0,2)
    return 5;               // (0,1)
}
}  // namespace voigt

}  // namespace sawstack
