/**
 * @file simulator.cpp
 * @brief Quasi-static bonded-cell crushing solver.
 */

#include "crush/simulator.hpp"

#include "crush/error.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace crush::simulator {

using geometry::Mat3;
using Vector = Eigen::VectorXd;

void CzmParams::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "czm: " + m); };
    for (double v : {K_I, K_II, sigma_I, sigma_II, G_I, G_II, rho})
        if (!(v > 0) || !std::isfinite(v)) fail("parameters must be positive");
    if (!(mu >= 0 && mu <= 1)) fail("mu must lie in [0, 1]");
    if (2 * G_I / sigma_I <= sigma_I / K_I) fail("mode I softening displacement below the elastic limit");
    if (2 * G_II / sigma_II <= sigma_II / K_II) fail("mode II softening displacement below the elastic limit");
}

// ---------------------------------------------------------------------------
// cohesive law
// ---------------------------------------------------------------------------

double CohesiveLaw::separation(double dn, double dt) const {
    const double sn = std::max(dn, 0.0) / p_.opening_onset();
    const double st = std::abs(dt) / p_.sliding_onset();
    return std::hypot(sn, st);
}

double CohesiveLaw::failure_separation(double dn, double dt) const {
    const double sn = std::max(dn, 0.0) / p_.opening_onset();
    const double st = std::abs(dt) / p_.sliding_onset();
    const double s2 = sn * sn + st * st;
    if (s2 <= 0) return 2 * p_.G_I / (p_.sigma_I * p_.opening_onset());
    const double en = p_.sigma_I * p_.opening_onset() * sn * sn / s2;
    const double et = p_.sigma_II * p_.sliding_onset() * st * st / s2;
    const double b = et / (en + et);
    const double gc = p_.G_I + (p_.G_II - p_.G_I) * b;
    return std::max(2 * gc / (en + et), 1.0 + 1e-9);
}

double CohesiveLaw::update(State& st, double dn, double dt) const {
    if (st.broken) return 0.0;
    const double s = separation(dn, dt);
    st.s_max = std::max(st.s_max, s);
    if (st.s_max <= 1.0 || s <= 0.0) return 0.0;
    const double sf = failure_separation(dn, dt);
    double d = st.s_max >= sf ? 1.0 : sf * (st.s_max - 1.0) / (st.s_max * (sf - 1.0));
    d = std::clamp(d, 0.0, 1.0);
    if (d <= st.damage) return 0.0;
    const double y = 0.5 * (p_.K_I * std::pow(std::max(dn, 0.0), 2) + p_.K_II * dt * dt);
    const double released = (d - st.damage) * y;
    st.damage = d;
    if (d >= 1.0) st.broken = true;
    return released;
}

std::pair<double, double> CohesiveLaw::traction(const State& st, double dn, double dt) const {
    const double kn = dn > 0 ? (1 - st.damage) * p_.K_I : p_.K_I;
    return {kn * dn, (1 - st.damage) * p_.K_II * dt};
}

double CohesiveLaw::energy(const State& st, double dn, double dt) const {
    const double kn = dn > 0 ? (1 - st.damage) * p_.K_I : p_.K_I;
    return 0.5 * (kn * dn * dn + (1 - st.damage) * p_.K_II * dt * dt);
}

PullResult pull_bond(const CzmParams& czm, double area, double mode_angle, int steps_to_onset) {
    czm.validate();
    const CohesiveLaw law(czm);
    const double cn = std::cos(mode_angle), ct = std::sin(mode_angle);
    const double onset = 1.0 / std::hypot(cn / czm.opening_onset(), ct / czm.sliding_onset());
    const double h = onset / steps_to_onset;
    CohesiveLaw::State st;
    PullResult out;
    out.curve.emplace_back(0.0, 0.0);
    double prev = 0.0;
    for (long k = 1; !st.broken; ++k) {
        const double lambda = k * h;
        const double dn = lambda * cn, dt = lambda * ct;
        out.dissipated += area * law.update(st, dn, dt);
        const auto [tn, tt] = law.traction(st, dn, dt);
        const double force = area * std::hypot(tn, tt);
        out.work += 0.5 * (prev + force) * h;
        out.peak_force = std::max(out.peak_force, force);
        out.curve.emplace_back(lambda, force);
        prev = force;
        if (k > 1000L * steps_to_onset) throw Error(ErrorKind::NonConvergence, "bond never broke");
    }
    return out;
}

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

namespace {

struct BondElement {
    int i = 0, j = 0;
    double area = 0.0;
    Vec3 n = Vec3::UnitZ();
    Mat3 pt = Mat3::Identity();  // tangential projector
    CohesiveLaw::State state;
    Vec3 slip = Vec3::Zero();    // contact slip once broken
    double cap = 0.0;
};

struct PlatenElement {
    int cell = 0;
    bool upper = false;
    double z = 0.0;   // vertex height in the loading frame
    double kn = 0.0, kt = 0.0;
    Vec3 slip = Vec3::Zero();
    double cap = 0.0;
};

struct Local {
    double e = 0.0;
    Vec3 g = Vec3::Zero();
    Mat3 h = Mat3::Zero();
};

// Unilateral penalty along n (penetration p = -(n.d + g0)) plus Coulomb friction
// with a fixed cap, written as a Huber potential in the tangential slip.
// `bound` replaces the Hessian by the closed, sticking contact's, an upper
// bound of the true one.
void contact_local(const Vec3& d, const Vec3& n, const Mat3& pt, double g0, double kn, double kt, const Vec3& slip,
                   double cap, bool want_h, bool bound, Local& out) {
    const double p = -(n.dot(d) + g0);
    if (p > 0) {
        out.e += 0.5 * kn * p * p;
        out.g -= kn * p * n;
    }
    if (want_h && (p > 0 || bound)) out.h += kn * n * n.transpose();
    const Vec3 x = pt * d - slip;
    const double r = x.norm();
    if (kt * r <= cap) {
        out.e += 0.5 * kt * r * r;
        out.g += kt * x;
        if (want_h) out.h += kt * pt;
    } else {
        const Vec3 xh = x / r;
        out.e += cap * r - 0.5 * cap * cap / kt;
        out.g += cap * xh;
        if (want_h) out.h += bound ? Mat3(kt * pt) : Mat3((cap / r) * (pt - xh * xh.transpose()));
    }
}

class Solver {
public:
    Solver(const tessellation::FragmentMesh& mesh, const CzmParams& czm, const LoadControl& control)
        : law_(czm), czm_(czm), ctl_(control), n_(static_cast<int>(mesh.size())) {
        for (const auto& a : mesh.adjacency) {
            const auto pm = geometry::polygon_measures(a.face);
            BondElement b;
            b.i = a.i;
            b.j = a.j;
            b.area = pm.area;
            b.n = pm.normal;
            b.pt = Mat3::Identity() - b.n * b.n.transpose();
            bonds_.push_back(b);
        }
        z_lo_ = std::numeric_limits<double>::infinity();
        z_hi0_ = -z_lo_;
        for (const auto& c : mesh.cells)
            for (const auto& v : c.vertices()) z_lo_ = std::min(z_lo_, v.z()), z_hi0_ = std::max(z_hi0_, v.z());
        gap0_ = z_hi0_ - z_lo_;
        double mean_area = 0.0;
        for (const auto& b : bonds_) mean_area += b.area;
        mean_area /= std::max<std::size_t>(bonds_.size(), 1);
        // A translating rigid cell can only touch a plane at its extreme vertex.
        for (int c = 0; c < n_; ++c) {
            const auto& verts = mesh.cells[c].vertices();
            const auto [lo, hi] = std::minmax_element(verts.begin(), verts.end(),
                                                      [](const Vec3& a, const Vec3& b) { return a.z() < b.z(); });
            for (bool upper : {false, true}) {
                PlatenElement e;
                e.cell = c;
                e.upper = upper;
                e.z = upper ? hi->z() : lo->z();
                e.kn = ctl_.platen_stiffness_scale * czm.K_I * mean_area;
                e.kt = ctl_.platen_stiffness_scale * czm.K_II * mean_area;
                platens_.push_back(e);
            }
        }
        k_reg_ = ctl_.regularization * czm.K_I * mean_area;
        tol_ = ctl_.eq_tol * czm.sigma_I * gap0_ * gap0_;
        z_hi_ = z_hi0_;
        u_ = Vector::Zero(3 * n_);
    }

    double gap0() const { return gap0_; }
    double gap() const { return z_hi_ - z_lo_; }
    void advance(double du) { z_hi_ -= du; }
    const std::vector<BondElement>& bonds() const { return bonds_; }
    int friction_stalls() const { return friction_stalls_; }

    double upper_force() const {
        double f = 0.0;
        for (const auto& e : platens_) {
            if (!e.upper) continue;
            const double p = z_of(e) - z_hi_;
            if (p > 0) f += e.kn * p;
        }
        return f;
    }

    // Equilibrium at the current platen position with damage frozen.
    bool solve() {
        update_caps();
        for (int outer = 0; outer < ctl_.max_friction_iters; ++outer) {
            if (!newton()) return false;
            double cap_max = 0.0;
            const double change = update_caps(&cap_max);
            if (change <= ctl_.friction_tol * cap_max || change <= 1e-15 * tol_scale()) return true;
        }
        // Self-locking wedges make the frictional problem non-unique and the cap
        // iteration can drift; the equilibrium itself is converged at this point.
        ++friction_stalls_;
        return true;
    }

    // Commits slip histories; returns frictional dissipation.
    double commit_friction() {
        double diss = 0.0;
        for (auto& b : bonds_) {
            if (!b.state.broken) continue;
            diss += commit(jump(b), b.pt, b.slip, czm_.K_II * b.area, b.cap);
        }
        for (auto& e : platens_) diss += commit(u_.segment<3>(3 * e.cell), kPlanar, e.slip, e.kt, e.cap);
        return diss;
    }

    struct DamageUpdate {
        double dissipated = 0.0;
        double max_change = 0.0;
        int new_breaks = 0;
    };

    DamageUpdate update_damage() {
        DamageUpdate out;
        for (auto& b : bonds_) {
            if (b.state.broken) continue;
            const Vec3 d = jump(b);
            const double dn = b.n.dot(d), dt = (b.pt * d).norm();
            const double before = b.state.damage;
            out.dissipated += b.area * law_.update(b.state, dn, dt);
            out.max_change = std::max(out.max_change, b.state.damage - before);
            if (b.state.broken) {
                ++out.new_breaks;
                b.slip = b.pt * d;
            }
        }
        return out;
    }

    int platen_contacts() const {
        return static_cast<int>(std::count_if(platens_.begin(), platens_.end(),
                                              [&](const PlatenElement& e) { return penetration(e) > 0; }));
    }

    // Contacts whose committed elastic slip sits on the Coulomb cap.
    int sliding() const {
        int count = 0;
        auto on_cap = [](double r, double kt, double cap) { return cap > 0 && kt * r >= cap * (1 - 1e-9); };
        for (const auto& b : bonds_)
            if (b.state.broken && on_cap((b.pt * jump(b) - b.slip).norm(), czm_.K_II * b.area, b.cap)) ++count;
        for (const auto& e : platens_)
            if (on_cap((kPlanar * u_.segment<3>(3 * e.cell) - e.slip).norm(), e.kt, e.cap)) ++count;
        return count;
    }

    bool any_onset() const {
        return std::any_of(bonds_.begin(), bonds_.end(), [](const BondElement& b) { return b.state.s_max > 1.0; });
    }
    int broken() const {
        return static_cast<int>(std::count_if(bonds_.begin(), bonds_.end(), [](const BondElement& b) { return b.state.broken; }));
    }

    // Elastic energy with committed slips.
    double stored_energy() const {
        double e = 0.5 * k_reg_ * u_.squaredNorm();
        for (const auto& b : bonds_) {
            const Vec3 d = jump(b);
            const double dn = b.n.dot(d);
            if (!b.state.broken) {
                e += b.area * law_.energy(b.state, dn, (b.pt * d).norm());
            } else {
                if (dn < 0) e += 0.5 * czm_.K_I * b.area * dn * dn;
                e += 0.5 * czm_.K_II * b.area * (b.pt * d - b.slip).squaredNorm();
            }
        }
        for (const auto& e2 : platens_) {
            const double p = penetration(e2);
            if (p > 0) e += 0.5 * e2.kn * p * p;
            e += 0.5 * e2.kt * (kPlanar * u_.segment<3>(3 * e2.cell) - e2.slip).squaredNorm();
        }
        return e;
    }

private:
    static inline const Mat3 kPlanar = Eigen::Vector3d(1, 1, 0).asDiagonal();

    double tol_scale() const { return czm_.sigma_I * gap0_ * gap0_; }

    Vec3 jump(const BondElement& b) const { return u_.segment<3>(3 * b.j) - u_.segment<3>(3 * b.i); }
    Vec3 jump(const BondElement& b, const Vector& u) const { return u.segment<3>(3 * b.j) - u.segment<3>(3 * b.i); }
    double z_of(const PlatenElement& e) const { return e.z + u_(3 * e.cell + 2); }
    double penetration(const PlatenElement& e) const {
        return e.upper ? z_of(e) - z_hi_ : z_lo_ - z_of(e);
    }

    static double commit(const Vec3& d, const Mat3& pt, Vec3& slip, double kt, double cap) {
        const Vec3 x = pt * d - slip;
        const double r = x.norm();
        if (kt * r <= cap) return 0.0;
        const double elastic = cap / kt;
        slip = pt * d - elastic * (x / r);
        return cap * (r - elastic);
    }

    // Recomputes friction caps from the current normal forces; returns the largest change.
    double update_caps(double* cap_max = nullptr) {
        double change = 0.0, top = 0.0;
        for (auto& b : bonds_) {
            if (!b.state.broken) continue;
            const double dn = b.n.dot(jump(b));
            const double cap = dn < 0 ? czm_.mu * czm_.K_I * b.area * (-dn) : 0.0;
            change = std::max(change, std::abs(cap - b.cap));
            top = std::max(top, cap);
            b.cap = cap;
        }
        for (auto& e : platens_) {
            const double p = penetration(e);
            const double cap = p > 0 ? czm_.mu * e.kn * p : 0.0;
            change = std::max(change, std::abs(cap - e.cap));
            top = std::max(top, cap);
            e.cap = cap;
        }
        if (cap_max) *cap_max = top;
        return change;
    }

    double assemble(const Vector& u, Vector* grad, std::vector<Eigen::Triplet<double>>* trip,
                    bool bound = false) const {
        const bool want_h = trip != nullptr;
        double energy = 0.5 * k_reg_ * u.squaredNorm();
        if (grad) *grad = k_reg_ * u;
        if (trip) {
            trip->clear();
            for (int k = 0; k < 3 * n_; ++k) trip->emplace_back(k, k, k_reg_);
        }
        auto add_block = [&](int r, int c, const Mat3& m) {
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    if (m(a, b) != 0.0) trip->emplace_back(3 * r + a, 3 * c + b, m(a, b));
        };
        for (const auto& b : bonds_) {
            const Vec3 d = jump(b, u);
            Local loc;
            if (!b.state.broken) {
                const double dn = b.n.dot(d);
                const double kn = (dn > 0 ? (1 - b.state.damage) : 1.0) * czm_.K_I * b.area;
                const double kt = (1 - b.state.damage) * czm_.K_II * b.area;
                const Vec3 t = b.pt * d;
                loc.e = 0.5 * (kn * dn * dn + kt * t.squaredNorm());
                loc.g = kn * dn * b.n + kt * t;
                if (want_h) loc.h = (bound ? czm_.K_I * b.area : kn) * b.n * b.n.transpose() + kt * b.pt;
            } else {
                contact_local(d, b.n, b.pt, 0.0, czm_.K_I * b.area, czm_.K_II * b.area, b.slip, b.cap, want_h, bound,
                              loc);
            }
            energy += loc.e;
            if (grad) {
                grad->segment<3>(3 * b.j) += loc.g;
                grad->segment<3>(3 * b.i) -= loc.g;
            }
            if (trip) {
                add_block(b.i, b.i, loc.h);
                add_block(b.j, b.j, loc.h);
                add_block(b.i, b.j, -loc.h);
                add_block(b.j, b.i, -loc.h);
            }
        }
        for (const auto& e : platens_) {
            const Vec3 d = u.segment<3>(3 * e.cell);
            const Vec3 n = e.upper ? Vec3(0, 0, -1) : Vec3(0, 0, 1);
            const double g0 = e.upper ? z_hi_ - e.z : e.z - z_lo_;
            Local loc;
            contact_local(d, n, kPlanar, g0, e.kn, e.kt, e.slip, e.cap, want_h, bound, loc);
            energy += loc.e;
            if (grad) grad->segment<3>(3 * e.cell) += loc.g;
            if (trip) add_block(e.cell, e.cell, loc.h);
        }
        return energy;
    }

    // Exact minimisation along du from u_ (the energy is convex along the line).
    // The step is chosen from the sign of the directional derivative, which
    // stays accurate where energy differences are lost to round-off.
    Vector line_search(const Vector& du, const Vector& g, double& alpha) const {
        const double slope = g.dot(du);
        Vector trial(3 * n_), gt(3 * n_);
        auto dphi = [&](double a) {
            trial = u_ + a * du;
            assemble(trial, &gt, nullptr);
            return gt.dot(du);
        };
        alpha = 1.0;
        double hi_d = dphi(1.0);
        if (!std::isfinite(hi_d)) return Vector();
        if (hi_d > 0) {
            double lo = 0.0, lo_d = slope, hi = 1.0;
            for (int ls = 0; ls < 50; ++ls) {
                const double w = hi - lo;
                alpha = std::clamp(lo - lo_d * w / (hi_d - lo_d), lo + 0.05 * w, hi - 0.05 * w);
                const double d = dphi(alpha);
                if (std::abs(d) <= 0.1 * std::abs(slope)) break;
                if (d < 0) lo = alpha, lo_d = d;
                else hi = alpha, hi_d = d;
            }
        }
        return trial;
    }

    bool newton() {
        Vector g(3 * n_);
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::SparseMatrix<double> h(3 * n_, 3 * n_), hb(3 * n_, 3 * n_);
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
        double taken = 1.0;
        for (int it = 0; it < ctl_.max_newton; ++it) {
            const double e0 = assemble(u_, &g, &trip);
            if (!std::isfinite(e0)) return false;
            if (g.lpNorm<Eigen::Infinity>() <= tol_) return true;
            h.setFromTriplets(trip.begin(), trip.end());
            ldlt.compute(h);
            if (ldlt.info() != Eigen::Success) return false;
            const Vector du = ldlt.solve(-g);
            if (!(g.dot(du) < 0)) return false;
            const bool crawling = taken < 0.01;
            Vector next = line_search(du, g, taken);
            if (next.size() == 0) return false;
            if (crawling) {
                // A contact on its stick/slip or open/closed switch makes the Newton
                // model overshoot every time (zig-zag), while the bounding Hessian
                // alone takes tiny steps along a sliding direction. Blend the two
                // and keep the lowest energy candidate.
                double best = assemble(next, nullptr, nullptr);
                assemble(u_, nullptr, &trip, true);
                hb.setFromTriplets(trip.begin(), trip.end());
                for (double theta : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
                    const Eigen::SparseMatrix<double> m = (1 - theta) * h + theta * hb;
                    ldlt.compute(m);
                    if (ldlt.info() != Eigen::Success) continue;
                    double alpha = 1.0;
                    Vector other = line_search(ldlt.solve(-g), g, alpha);
                    if (other.size() == 0) continue;
                    const double e = assemble(other, nullptr, nullptr);
                    if (e < best) {
                        best = e;
                        next = std::move(other);
                        taken = alpha;
                    }
                }
            }
            u_ = std::move(next);
        }
        assemble(u_, &g, nullptr);
        return g.lpNorm<Eigen::Infinity>() <= tol_;
    }

    CohesiveLaw law_;
    CzmParams czm_;
    LoadControl ctl_;
    int n_ = 0;
    std::vector<BondElement> bonds_;
    std::vector<PlatenElement> platens_;
    double z_lo_ = 0.0, z_hi0_ = 0.0, z_hi_ = 0.0, gap0_ = 0.0;
    double k_reg_ = 0.0, tol_ = 0.0;
    int friction_stalls_ = 0;
    Vector u_;
};

}  // namespace

bool has_valid_drop(const std::vector<CurvePoint>& curve, double drop_fraction) {
    double peak = 0.0;
    for (const auto& p : curve) {
        if (peak > 0 && p.force <= (1.0 - drop_fraction) * peak) return true;
        peak = std::max(peak, p.force);
    }
    return false;
}

double strength(const CrushRecord& record) {
    if (!record.valid) throw Error(ErrorKind::InvalidRecord, "record " + record.particle_id + " has no valid breakage");
    if (!(record.gap_at_peak > 0)) throw Error(ErrorKind::InvalidRecord, "non-positive gap at peak");
    return record.peak_force / (record.gap_at_peak * record.gap_at_peak);
}

CrushRecord simulate_crush(const tessellation::FragmentMesh& mesh, Axis axis, const CzmParams& czm,
                           const LoadControl& control, const SimulationOptions& options) {
    czm.validate();
    if (!mesh.connected()) throw Error(ErrorKind::DisconnectedMesh, "mesh adjacency graph is disconnected");
    Solver solver(mesh.rotated(axis_to_z(axis)), czm, control);

    CrushRecord rec;
    rec.bonds = static_cast<int>(solver.bonds().size());
    const double du = control.step_fraction * solver.gap0();
    CurvePoint state;
    state.gap = solver.gap();
    rec.curve.push_back(state);

    for (int step = 1; step <= control.max_steps; ++step) {
        solver.advance(du);
        rec.steps_run = step;
        if (!solver.solve()) {
            rec.converged = false;
            break;
        }
        const double f_first = solver.upper_force();
        state.external_work += 0.5 * (state.force + f_first) * du;
        state.friction_dissipated += solver.commit_friction();

        for (int r = 0; r < control.max_relax; ++r) {
            const auto upd = solver.update_damage();
            state.czm_dissipated += upd.dissipated;
            if (upd.new_breaks == 0 && upd.max_change <= 1e-9) break;
            const double before = solver.stored_energy();
            if (!solver.solve()) {
                rec.converged = false;
                break;
            }
            const double fr = solver.commit_friction();
            const double release = std::max(0.0, before - solver.stored_energy() - fr);
            state.friction_dissipated += fr;
            state.relaxation_release += release;
            state.czm_dissipated += release;
        }
        if (!rec.converged) break;

        state.step = step;
        state.gap = solver.gap();
        state.force = solver.upper_force();
        state.stored = solver.stored_energy();
        state.broken_bonds = solver.broken();
        state.platen_contacts = solver.platen_contacts();
        state.sliding = solver.sliding();
        rec.curve.push_back(state);
        if (rec.onset_step < 0 && solver.any_onset()) rec.onset_step = step;
        if (options.keep_damage_history) {
            std::vector<double> d;
            for (const auto& b : solver.bonds()) d.push_back(b.state.damage);
            rec.damage_history.push_back(std::move(d));
        }
        if (state.force > rec.peak_force) {
            rec.peak_force = state.force;
            rec.gap_at_peak = state.gap;
        }
        if (rec.peak_force > 0 && state.force <= (1.0 - control.drop_fraction) * rec.peak_force) {
            rec.valid = true;
            break;
        }
    }
    rec.broken_bonds = solver.broken();
    rec.friction_stalls = solver.friction_stalls();
    for (const auto& b : solver.bonds()) rec.final_damage.push_back(b.state.damage);
    if (!rec.converged) rec.valid = false;
    rec.strength = rec.valid ? strength(rec) : 0.0;
    return rec;
}

// ---------------------------------------------------------------------------
// I/O
// ---------------------------------------------------------------------------

nlohmann::json to_json(const CrushRecord& r) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.curve) curve.push_back({p.gap, p.force});
    nlohmann::json j;
    j["schema"] = kRecordSchema;
    j["particle_id"] = r.particle_id;
    j["valid"] = r.valid;
    j["converged"] = r.converged;
    j["steps_run"] = r.steps_run;
    j["peak_force"] = r.peak_force;
    j["gap_at_peak"] = r.gap_at_peak;
    j["strength"] = r.strength;
    j["onset_step"] = r.onset_step;
    j["bonds"] = r.bonds;
    j["broken_bonds"] = r.broken_bonds;
    j["friction_stalls"] = r.friction_stalls;
    if (!r.curve.empty()) {
        const auto& last = r.curve.back();
        j["energy"] = {{"external_work", last.external_work},
                       {"stored", last.stored},
                       {"czm_dissipated", last.czm_dissipated},
                       {"relaxation_release", last.relaxation_release},
                       {"friction_dissipated", last.friction_dissipated}};
    }
    j["curve"] = curve;
    return j;
}

CrushRecord record_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kRecordSchema)
        throw Error(ErrorKind::SchemaMismatch, "expected " + std::string(kRecordSchema));
    CrushRecord r;
    r.particle_id = j.at("particle_id").get<std::string>();
    r.valid = j.at("valid").get<bool>();
    r.converged = j.value("converged", true);
    r.steps_run = j.at("steps_run").get<int>();
    r.peak_force = j.at("peak_force").get<double>();
    r.gap_at_peak = j.at("gap_at_peak").get<double>();
    r.strength = j.at("strength").get<double>();
    r.onset_step = j.value("onset_step", -1);
    r.bonds = j.value("bonds", 0);
    r.broken_bonds = j.value("broken_bonds", 0);
    r.friction_stalls = j.value("friction_stalls", 0);
    int step = 0;
    for (const auto& p : j.at("curve")) {
        CurvePoint c;
        c.step = step++;
        c.gap = p.at(0).get<double>();
        c.force = p.at(1).get<double>();
        r.curve.push_back(c);
    }
    return r;
}

std::string curve_csv(const CrushRecord& record) {
    std::ostringstream os;
    os.precision(17);
    os << "step,gap_mm,force_N\n";
    for (const auto& p : record.curve) os << p.step << ',' << p.gap << ',' << p.force << '\n';
    return os.str();
}

}  // namespace crush::simulator
