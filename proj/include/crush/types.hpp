/**
 * @file types.hpp
 * @brief Small domain types shared across modules.
 */
#pragma once

#include "crush/geometry.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace crush {

enum class Axis { X, Y, Z };

std::string_view to_string(Axis axis);
Axis parse_axis(std::string_view text);

/// Proper rotation taking `axis` onto +Z (a cyclic permutation of coordinates).
geometry::Mat3 axis_to_z(Axis axis);

/// One particle type: diameter, (X, Y, Z) scale shape and compression axis.
struct TypeKey {
    double diameter = 0.0;
    geometry::Vec3 shape = geometry::Vec3::Ones();
    Axis axis = Axis::Z;

    /// Stable text form, e.g. "d14.35_s1,1,1_Z".
    std::string label() const;
};

bool operator==(const TypeKey& a, const TypeKey& b);
bool operator<(const TypeKey& a, const TypeKey& b);

/// The dataset configuration table (20 diameters, 15 shapes, 3 axes).
namespace table {
const std::vector<double>& diameters();
const std::vector<geometry::Vec3>& shapes();
/// Shape tuples as written in the table, e.g. "1.25,1.44/1.25,1".
const std::vector<std::string>& shape_texts();
/// The five shapes held out for the Shape task.
bool is_test_shape(const geometry::Vec3& shape);
/// Parses "a,b,c" where each entry may be a quotient "p/q".
geometry::Vec3 parse_shape(std::string_view text);
}  // namespace table

}  // namespace crush
