/**
 * @file error.hpp
 * @brief Error type shared by every stage of the pipeline.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crush {

enum class ErrorKind {
    DegenerateSpec,
    DegenerateInertia,
    DegenerateGeometry,
    EmptyCell,
    DisconnectedMesh,
    NonConvergence,
    InvalidRecord,
    InsufficientData,
    DegenerateSample,
    DisconnectedGraph,
    UnknownTask,
    ShapeMismatch,
    NonFinite,
    SchemaMismatch,
    MissingInput,
    Config,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace crush
