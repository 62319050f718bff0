/**
 * @file simulator.hpp
 * @brief Quasi-static bonded-cell compression between two rigid platens.
 *
 * Every cell is a rigid body with three translational degrees of freedom.
 * Cells are tied by cohesive bonds on their shared faces (bilinear
 * traction-separation with mixed-mode damage). Broken bonds and the platens
 * interact through compressive-only penalty contact with Coulomb friction.
 *
 * Each load step solves static equilibrium with damage frozen: the frictional
 * caps are fixed by an outer fixed-point loop, which turns the inner problem
 * into a convex energy minimisation (Newton with backtracking line search).
 * Damage is updated after convergence and the step is re-equilibrated at the
 * same platen position until the damage field stops changing.
 */
#pragma once

#include "crush/tessellation.hpp"
#include "crush/types.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace crush::simulator {

using geometry::Vec3;

/// Cohesive-zone parameters. Units: N, mm, MPa. Fracture energies in N/mm.
struct CzmParams {
    double K_I = 80.0;        ///< normal stiffness per area, N/mm^3
    double K_II = 120.0;      ///< tangential stiffness per area, N/mm^3
    double sigma_I = 9.0;     ///< normal strength, MPa
    double sigma_II = 11.5;   ///< shear strength, MPa
    double G_I = 0.9;         ///< mode I fracture energy, N/mm (900 J/m^2)
    double G_II = 1.125;      ///< mode II fracture energy, N/mm (1125 J/m^2)
    double mu = 0.3;          ///< Coulomb friction coefficient
    double rho = 2650.0;      ///< density, kg/m^3 (not used by the quasi-static solver)

    double opening_onset() const { return sigma_I / K_I; }
    double sliding_onset() const { return sigma_II / K_II; }
    /// Throws Error(Config) when an invariant is violated.
    void validate() const;
};

/// Mixed-mode bilinear damage law in normalised separation
///   s = sqrt((<dn>/dn0)^2 + (|dt|/dt0)^2).
/// Damage starts at s = 1 (quadratic stress criterion) and completes at s_f,
/// chosen so that the dissipated energy per area equals the mode-mixed
/// fracture energy G_c = G_I + (G_II - G_I) * B, B = shear share of the
/// undamaged elastic energy.
class CohesiveLaw {
public:
    explicit CohesiveLaw(const CzmParams& p) : p_(p) {}

    struct State {
        double damage = 0.0;
        double s_max = 0.0;
        bool broken = false;
    };

    /// Normalised separation of an opening/sliding pair (dn signed, dt >= 0).
    double separation(double dn, double dt) const;
    /// Separation at full breakage for the current mode mix.
    double failure_separation(double dn, double dt) const;
    /// Updates history and damage for the current jump. Returns the energy
    /// per area dissipated by this update.
    double update(State& st, double dn, double dt) const;
    /// Traction (normal, tangential magnitude) per area for a given state.
    std::pair<double, double> traction(const State& st, double dn, double dt) const;
    /// Stored energy per area.
    double energy(const State& st, double dn, double dt) const;

    const CzmParams& params() const { return p_; }

private:
    CzmParams p_;
};

struct LoadControl {
    double step_fraction = 1e-3;      ///< platen advance per step as a fraction of the initial gap
    int max_steps = 2000;
    double drop_fraction = 0.35;      ///< post-peak drop that marks a valid breakage
    double eq_tol = 1e-9;             ///< residual tolerance relative to sigma_I * gap^2
    int max_newton = 200;
    double friction_tol = 1e-8;       ///< relative change of the friction caps
    int max_friction_iters = 100;
    int max_relax = 400;              ///< damage re-equilibrations per step
    double platen_stiffness_scale = 100.0;  ///< platen penalty = scale * K_I * mean bond area
    double regularization = 1e-6;     ///< ground spring relative to the mean bond stiffness
};

struct CurvePoint {
    int step = 0;
    double gap = 0.0;    ///< platen distance, mm
    double force = 0.0;  ///< upper platen reaction, N
    // cumulative energy bookkeeping, N mm
    double external_work = 0.0;
    double stored = 0.0;
    double czm_dissipated = 0.0;       ///< damage dissipation plus relaxation release
    double relaxation_release = 0.0;   ///< part of czm_dissipated freed by re-equilibration after damage jumps
    double friction_dissipated = 0.0;
    int broken_bonds = 0;
    int platen_contacts = 0;  ///< cells touching a platen
    int sliding = 0;          ///< frictional contacts at their Coulomb cap
};

struct CrushRecord {
    std::string particle_id;
    std::vector<CurvePoint> curve;
    double peak_force = 0.0;
    double gap_at_peak = 0.0;
    double strength = 0.0;  ///< MPa; 0 when the record is invalid
    bool valid = false;
    bool converged = true;
    int steps_run = 0;
    int onset_step = -1;    ///< first step after which some bond had started to soften
    int bonds = 0;
    int broken_bonds = 0;
    int friction_stalls = 0;  ///< solves whose friction caps did not settle (non-unique wedge states)
    std::vector<double> final_damage;  ///< per bond, for monotonicity checks
    std::vector<std::vector<double>> damage_history;  ///< per step, only when requested
};

/// Strength sigma = F_c / d^2 of a valid record (MPa). Throws InvalidRecord.
double strength(const CrushRecord& record);
/// True when some sample after the peak is at or below (1 - drop) * peak.
bool has_valid_drop(const std::vector<CurvePoint>& curve, double drop_fraction = 0.35);

struct SimulationOptions {
    bool keep_damage_history = false;
};

CrushRecord simulate_crush(const tessellation::FragmentMesh& mesh, Axis axis, const CzmParams& czm,
                           const LoadControl& control = {}, const SimulationOptions& options = {});

/// Displacement-driven test of a single bond of area `area`: the jump grows
/// proportionally along (cos(angle) n + sin(angle) t) until breakage.
struct PullResult {
    double peak_force = 0.0;            ///< max |traction| * area
    double dissipated = 0.0;            ///< sum of damage-update dissipation
    double work = 0.0;                  ///< trapezoidal integral of force * d(jump)
    std::vector<std::pair<double, double>> curve;  ///< (|jump|, |force|)
};
PullResult pull_bond(const CzmParams& czm, double area, double mode_angle, int steps_to_onset = 2000);

constexpr const char* kRecordSchema = "crush.record/1";
nlohmann::json to_json(const CrushRecord& record);
CrushRecord record_from_json(const nlohmann::json& j);
/// step,gap_mm,force_N
std::string curve_csv(const CrushRecord& record);

}  // namespace crush::simulator
