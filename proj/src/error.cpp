#include "crush/error.hpp"

namespace crush {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DegenerateSpec: return "DegenerateSpec";
        case ErrorKind::DegenerateInertia: return "DegenerateInertia";
        case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorKind::EmptyCell: return "EmptyCell";
        case ErrorKind::DisconnectedMesh: return "DisconnectedMesh";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::InvalidRecord: return "InvalidRecord";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::DegenerateSample: return "DegenerateSample";
        case ErrorKind::DisconnectedGraph: return "DisconnectedGraph";
        case ErrorKind::UnknownTask: return "UnknownTask";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::MissingInput: return "MissingInput";
        case ErrorKind::Config: return "Config";
    }
    return "Unknown";
}

}  // namespace crush
