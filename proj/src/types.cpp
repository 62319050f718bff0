#include "crush/types.hpp"

#include "crush/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <tuple>

namespace crush {

std::string_view to_string(Axis axis) {
    switch (axis) {
        case Axis::X: return "X";
        case Axis::Y: return "Y";
        case Axis::Z: return "Z";
    }
    return "?";
}

Axis parse_axis(std::string_view text) {
    if (text == "X" || text == "x") return Axis::X;
    if (text == "Y" || text == "y") return Axis::Y;
    if (text == "Z" || text == "z") return Axis::Z;
    throw Error(ErrorKind::Config, "unknown compression axis '" + std::string(text) + "'");
}

geometry::Mat3 axis_to_z(Axis axis) {
    geometry::Mat3 r;
    switch (axis) {
        case Axis::X: r << 0, 1, 0, 0, 0, 1, 1, 0, 0; break;
        case Axis::Y: r << 0, 0, 1, 1, 0, 0, 0, 1, 0; break;
        case Axis::Z: r.setIdentity(); break;
    }
    return r;
}

std::string TypeKey::label() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "d%.10g_s%.10g,%.10g,%.10g_%s", diameter, shape.x(), shape.y(), shape.z(),
                  std::string(to_string(axis)).c_str());
    return buf;
}

bool operator==(const TypeKey& a, const TypeKey& b) {
    return a.diameter == b.diameter && a.shape == b.shape && a.axis == b.axis;
}

bool operator<(const TypeKey& a, const TypeKey& b) {
    return std::tie(a.diameter, a.shape.x(), a.shape.y(), a.shape.z(), a.axis) <
           std::tie(b.diameter, b.shape.x(), b.shape.y(), b.shape.z(), b.axis);
}

namespace table {

namespace {

double parse_number(std::string_view t) {
    while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
    while (!t.empty() && t.back() == ' ') t.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw Error(ErrorKind::Config, "bad number '" + std::string(t) + "'");
    return v;
}

double parse_quotient(std::string_view t) {
    const auto slash = t.find('/');
    if (slash == std::string_view::npos) return parse_number(t);
    return parse_number(t.substr(0, slash)) / parse_number(t.substr(slash + 1));
}

}  // namespace

const std::vector<double>& diameters() {
    static const std::vector<double> d = {11.86, 13.10, 14.35, 15.60, 16.85, 18.10, 19.34, 20.59, 21.84, 23.09,
                                          24.34, 25.58, 26.83, 28.08, 29.33, 30.58, 31.82, 33.07, 34.32, 35.57};
    return d;
}

const std::vector<std::string>& shape_texts() {
    static const std::vector<std::string> s = {
        "1,1,1",   "1/0.95,0.95,1",  "1/0.9,0.9,1",  "1.1,1.1,1", "1.25,1.21/1.25,1",
        "1.21/0.9,0.9,1", "1.2,1.2,1", "1.25,1.44/1.25,1", "1.5,1.44/1.5,1", "1.3,1.3,1",
        "1.25,1.69/1.25,1", "1.5,1.69/1.5,1", "1.4,1.4,1", "1.25,1.96/1.25,1", "1.5,1.96/1.5,1"};
    return s;
}

const std::vector<geometry::Vec3>& shapes() {
    static const std::vector<geometry::Vec3> s = [] {
        std::vector<geometry::Vec3> out;
        for (const auto& t : shape_texts()) out.push_back(parse_shape(t));
        return out;
    }();
    return s;
}

bool is_test_shape(const geometry::Vec3& shape) {
    for (int i : {1, 4, 7, 10, 13})
        if ((shapes()[i] - shape).cwiseAbs().maxCoeff() <= 1e-9) return true;
    return false;
}

geometry::Vec3 parse_shape(std::string_view text) {
    geometry::Vec3 v;
    for (int k = 0; k < 3; ++k) {
        const auto comma = text.find(',');
        if ((k < 2) != (comma != std::string_view::npos))
            throw Error(ErrorKind::Config, "shape needs three comma-separated entries");
        v[k] = parse_quotient(text.substr(0, comma));
        if (!(v[k] > 0) || !std::isfinite(v[k])) throw Error(ErrorKind::Config, "shape entries must be positive");
        if (k < 2) text.remove_prefix(comma + 1);
    }
    return v;
}

}  // namespace table

}  // namespace crush
