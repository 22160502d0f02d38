// THRU-REFLECT-LINE calibration: solves the 8-term error model from raw
// standard measurements, de-embeds DUT measurements, and verifies the
// calibration with a re-measured THRU.
//
// Formulation.  With wave-cascade matrices, a raw measurement of element E is
//   M = Tx * T(E) * Ty
// where Tx, Ty are the input/output error boxes.  The THRU is zero-length
// (T = I) and the LINE is matched with unknown propagation,
// T(line) = diag(e^{+gl}, e^{-gl}).  Then
//   Td = Ml * Mt^{-1} = Tx * diag(e^{+gl}, e^{-gl}) * Tx^{-1}
//   Te = Mt^{-1} * Ml = Ty^{-1} * diag(e^{+gl}, e^{-gl}) * Ty
// so the eigenvalues of Td give e^{+-gl}, its eigenvectors give the columns
// of Tx up to two scale factors p, q, and the eigenvectors of Te give the
// columns of Ty^{-1} up to r, s.  The THRU measurement fixes p/r and q/s; the
// REFLECT measurements at both ports fix r/s up to the reflect's sign, which
// is resolved by the known standard type (SHORT: root closer to -1).  The
// remaining overall scale k (Tx -> k Tx, Ty -> Ty/k) is unobservable and
// cancels in de-embedding.
#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

#include "touchstone.hpp"
#include "two_port.hpp"

namespace cryorf {

enum class ReflectKind { SHORT, OPEN };

struct TrlStandardsMeasurement {
    TwoPortNetwork m_thru;
    TwoPortNetwork m_line;
    ReflectionTrace m_reflect_p1;
    ReflectionTrace m_reflect_p2;
    ReflectKind reflect_kind = ReflectKind::SHORT;

    void validate() const {
        require_same_grid(m_thru.grid(), m_line.grid(), "TRL standards");
        require_same_grid(m_thru.grid(), m_reflect_p1.grid, "TRL standards");
        require_same_grid(m_thru.grid(), m_reflect_p2.grid, "TRL standards");
    }
};

struct TrlConditioning {
    double line_phase_deg = 0.0;  // electrical phase of the line, folded to (0, 180)
    bool ill_conditioned = false; // phase within the warning band of 0 or 180 deg
    double thru_residual = 0.0;   // off-diagonal leakage of the thru consistency check
};

struct ErrorModel {
    TwoPortNetwork input_box;              // port 1: instrument, port 2: DUT plane
    TwoPortNetwork output_box;             // port 1: DUT plane, port 2: instrument
    std::vector<Complex> line_propagation; // e^{-gl} per frequency
    std::vector<Complex> reflect_estimate; // solved reflect coefficient per frequency
    std::vector<TrlConditioning> conditioning;

    const FrequencyGrid& grid() const { return input_box.grid(); }

    std::vector<std::size_t> ill_conditioned_points() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < conditioning.size(); ++i)
            if (conditioning[i].ill_conditioned) idx.push_back(i);
        return idx;
    }
};

struct TrlOptions {
    // Line phases closer than this to 0 or 180 degrees are flagged.
    double conditioning_band_deg = 20.0;
};

namespace detail {

struct EigVec2 {
    Complex v0, v1; // unit-norm eigenvector components
};

// Eigenvector of a 2x2 matrix for a known eigenvalue; picks the better
// conditioned of the two analytic candidates.  Normalized so the dominant
// component is exactly 1, which keeps an ideal fixture's error boxes equal
// to ideal thru halves rather than a unit-phase multiple of them.
inline EigVec2 eigenvector_for(const TMatrix& m, Complex lambda) {
    const Complex a0 = m.t12, a1 = lambda - m.t11;
    const Complex b0 = lambda - m.t22, b1 = m.t21;
    const double na = std::abs(a0) + std::abs(a1);
    const double nb = std::abs(b0) + std::abs(b1);
    Complex v0 = (na >= nb) ? a0 : b0;
    Complex v1 = (na >= nb) ? a1 : b1;
    const Complex dom = (std::abs(v0) >= std::abs(v1)) ? v0 : v1;
    if (std::abs(dom) == 0.0) throw Error("defective eigenvector");
    return {v0 / dom, v1 / dom};
}

inline TMatrix invert_columns(const EigVec2& c1, const EigVec2& c2, const std::string& where) {
    const Complex det = c1.v0 * c2.v1 - c2.v0 * c1.v1;
    if (std::abs(det) < 1e-300) throw Error("degenerate eigenvectors at " + where);
    return {c2.v1 / det, -c2.v0 / det, -c1.v1 / det, c1.v0 / det};
}

} // namespace detail

inline ErrorModel solve_trl(const TrlStandardsMeasurement& meas, const TrlOptions& opt = {}) {
    meas.validate();
    const FrequencyGrid& grid = meas.m_thru.grid();
    const std::size_t n = grid.size();

    std::vector<SMatrix> sx(n), sy(n);
    std::vector<Complex> prop(n), refl(n);
    std::vector<TrlConditioning> cond(n);

    for (std::size_t i = 0; i < n; ++i) {
        const std::string where = TwoPortNetwork::frequency_label(grid[i]);
        TMatrix mt, ml;
        try {
            mt = t_from_s(meas.m_thru.at(i));
            ml = t_from_s(meas.m_line.at(i));
        } catch (const Error& e) {
            throw Error(std::string(e.what()) + " in TRL standards at " + where);
        }
        const TMatrix mti = mt.inverse();
        const TMatrix td = ml * mti;
        const TMatrix te = mti * ml;

        // Eigenvalues of Td (shared with Te): e^{+gl} and e^{-gl}.
        const Complex tr = td.t11 + td.t22;
        const Complex det = td.det();
        const Complex disc = std::sqrt(tr * tr - 4.0 * det);
        const Complex l1 = 0.5 * (tr + disc);
        const Complex l2 = 0.5 * (tr - disc);
        if (std::abs(l1 - l2) < 1e-12 * (std::abs(l1) + std::abs(l2)))
            throw Error("degenerate line eigenvalues at " + where +
                        " (line indistinguishable from thru)");

        // Assign e^{-gl}: the smaller-magnitude eigenvalue for a lossy line;
        // for a lossless one, the root with phase in (-180, 0) so the line's
        // electrical length is positive.
        Complex lam_small;
        const double logmag = std::log(std::abs(l1) / std::abs(l2));
        if (std::abs(logmag) > 2e-7)
            lam_small = (logmag > 0.0) ? l2 : l1;
        else
            lam_small = (std::arg(l1) < 0.0) ? l1 : l2;
        const Complex lam_big = (lam_small == l1) ? l2 : l1;

        const double phase_deg = std::abs(std::arg(lam_small)) * 180.0 / M_PI;
        cond[i].line_phase_deg = phase_deg;
        cond[i].ill_conditioned = (phase_deg < opt.conditioning_band_deg ||
                                   phase_deg > 180.0 - opt.conditioning_band_deg);
        prop[i] = lam_small;

        const auto v1 = detail::eigenvector_for(td, lam_big);
        const auto v2 = detail::eigenvector_for(td, lam_small);
        const auto w1 = detail::eigenvector_for(te, lam_big);
        const auto w2 = detail::eigenvector_for(te, lam_small);

        const TMatrix vi = detail::invert_columns(v1, v2, where); // V^{-1}
        const TMatrix wi = detail::invert_columns(w1, w2, where); // W^{-1}

        // Thru consistency: D = V^{-1} Mt W should be diagonal; its diagonal
        // fixes the relative column scales d1 = p/r, d2 = q/s.
        const TMatrix mtw{mt.t11 * w1.v0 + mt.t12 * w1.v1, mt.t11 * w2.v0 + mt.t12 * w2.v1,
                          mt.t21 * w1.v0 + mt.t22 * w1.v1, mt.t21 * w2.v0 + mt.t22 * w2.v1};
        const TMatrix d = vi * mtw;
        const Complex d1 = d.t11;
        const Complex d2 = d.t22;
        if (std::abs(d1) == 0.0 || std::abs(d2) == 0.0)
            throw Error("inconsistent thru measurement at " + where);
        cond[i].thru_residual = (std::abs(d.t12) + std::abs(d.t21)) /
                                (std::abs(d1) + std::abs(d2));

        // Port-1 reflect:  w1m = (Tx21 + Tx22 G)/(Tx11 + Tx12 G) with
        // Tx = [d1*r*v1, d2*s*v2] gives  G*u, u = (d2 s)/(d1 r).
        const Complex w1m = meas.m_reflect_p1.gamma[i];
        const Complex w2m = meas.m_reflect_p2.gamma[i];
        const Complex den1 = w1m * v2.v0 - v2.v1;
        if (std::abs(den1) == 0.0)
            throw Error("reflect measurement degenerate at port 1, " + where);
        const Complex gamma_u = (v1.v1 - w1m * v1.v0) / den1;

        // Port-2 reflect through Ty = diag(1/r, 1/s) W^{-1} gives G*rho,
        // rho = r/s.
        const Complex den2 = wi.t22 + w2m * wi.t21;
        if (std::abs(den2) == 0.0)
            throw Error("reflect measurement degenerate at port 2, " + where);
        const Complex gamma_rho = (w2m * wi.t11 + wi.t12) / den2;

        // (G u)(G rho)(d1/d2) = G^2.  Sign from the known standard.
        const Complex gamma_sq = gamma_u * gamma_rho * (d1 / d2);
        Complex gamma = std::sqrt(gamma_sq);
        const Complex nominal = (meas.reflect_kind == ReflectKind::SHORT) ? Complex(-1.0)
                                                                          : Complex(1.0);
        if (std::abs(gamma - nominal) > std::abs(-gamma - nominal)) gamma = -gamma;
        if (std::abs(gamma) == 0.0)
            throw Error("reflect solution vanished at " + where);
        refl[i] = gamma;
        const Complex rho = gamma_rho / gamma;

        // Fix the unobservable scale with r = 1:
        //   Tx = V diag(d1, d2/rho),  Ty = diag(1, rho) W^{-1}.
        const TMatrix tx{v1.v0 * d1, v2.v0 * d2 / rho, v1.v1 * d1, v2.v1 * d2 / rho};
        const TMatrix ty{wi.t11, wi.t12, rho * wi.t21, rho * wi.t22};
        try {
            sx[i] = s_from_t(tx);
            sy[i] = s_from_t(ty);
        } catch (const Error& e) {
            throw Error(std::string(e.what()) + " while forming error boxes at " + where);
        }
    }

    ErrorModel em;
    em.input_box = TwoPortNetwork(grid, std::move(sx));
    em.output_box = TwoPortNetwork(grid, std::move(sy));
    em.line_propagation = std::move(prop);
    em.reflect_estimate = std::move(refl);
    em.conditioning = std::move(cond);
    return em;
}

// Removes the error boxes from a raw measurement:  T = Tx^{-1} M Ty^{-1}.
inline TwoPortNetwork deembed(const ErrorModel& em, const TwoPortNetwork& raw) {
    require_same_grid(em.grid(), raw.grid(), "deembed");
    std::vector<SMatrix> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const std::string where = TwoPortNetwork::frequency_label(raw.grid()[i]);
        try {
            const TMatrix tx = t_from_s(em.input_box.at(i));
            const TMatrix ty = t_from_s(em.output_box.at(i));
            out[i] = s_from_t(tx.inverse() * t_from_s(raw.at(i)) * ty.inverse());
        } catch (const Error& e) {
            throw Error("singular error box at " + where + ": " + e.what());
        }
    }
    return TwoPortNetwork(raw.grid(), std::move(out));
}

// Forward-embeds a DUT between the error boxes (the inverse of deembed);
// used to synthesize raw measurements.
inline TwoPortNetwork embed(const ErrorModel& em, const TwoPortNetwork& dut) {
    return cascade(em.input_box, dut, em.output_box);
}

struct CalVerification {
    ScalarTrace residual_db; // |S21| of the de-embedded thru, in dB
    double max_abs_db = 0.0;
    bool pass = false;
    double tolerance_db = 0.05;
};

// Verifies a calibration by de-embedding a freshly measured THRU; the
// de-embedded insertion loss should be 0 dB.
inline CalVerification verify_cal(const ErrorModel& em, const TwoPortNetwork& m_thru,
                                  double tolerance_db = 0.05) {
    const TwoPortNetwork corrected = deembed(em, m_thru);
    CalVerification v;
    v.residual_db = corrected.s21_db();
    v.tolerance_db = tolerance_db;
    v.max_abs_db = 0.0;
    for (double r : v.residual_db.values) v.max_abs_db = std::max(v.max_abs_db, std::abs(r));
    v.pass = v.max_abs_db <= tolerance_db;
    return v;
}

// --- JSON form: per-frequency complex terms stored as [re, im] pairs --------

namespace detail {

inline nlohmann::json complex_array(const std::vector<Complex>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const Complex& c : v) a.push_back({c.real(), c.imag()});
    return a;
}

inline std::vector<Complex> complex_array_from(const nlohmann::json& a) {
    std::vector<Complex> v;
    for (const auto& p : a) v.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return v;
}

inline nlohmann::json network_to_json(const TwoPortNetwork& n) {
    std::vector<Complex> s11, s12, s21, s22;
    for (const auto& m : n.points()) {
        s11.push_back(m.s11);
        s12.push_back(m.s12);
        s21.push_back(m.s21);
        s22.push_back(m.s22);
    }
    return {{"s11", complex_array(s11)}, {"s12", complex_array(s12)},
            {"s21", complex_array(s21)}, {"s22", complex_array(s22)}};
}

inline TwoPortNetwork network_from_json(const FrequencyGrid& grid, const nlohmann::json& j) {
    const auto s11 = complex_array_from(j.at("s11"));
    const auto s12 = complex_array_from(j.at("s12"));
    const auto s21 = complex_array_from(j.at("s21"));
    const auto s22 = complex_array_from(j.at("s22"));
    std::vector<SMatrix> pts(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) pts[i] = {s11[i], s12[i], s21[i], s22[i]};
    return TwoPortNetwork(grid, std::move(pts));
}

} // namespace detail

inline nlohmann::json to_json(const ErrorModel& em) {
    nlohmann::json cond;
    {
        std::vector<double> phase, resid;
        std::vector<int> flagged;
        for (const auto& c : em.conditioning) {
            phase.push_back(c.line_phase_deg);
            resid.push_back(c.thru_residual);
            flagged.push_back(c.ill_conditioned ? 1 : 0);
        }
        cond = {{"line_phase_deg", phase}, {"ill_conditioned", flagged},
                {"thru_residual", resid}};
    }
    return {{"schema", 1},
            {"freq_hz", em.grid().points()},
            {"input_box", detail::network_to_json(em.input_box)},
            {"output_box", detail::network_to_json(em.output_box)},
            {"line_propagation", detail::complex_array(em.line_propagation)},
            {"reflect_estimate", detail::complex_array(em.reflect_estimate)},
            {"conditioning", cond}};
}

inline ErrorModel error_model_from_json(const nlohmann::json& j) {
    if (j.value("schema", 0) != 1) throw Error("unsupported error-model schema");
    std::vector<double> freqs;
    for (double f : j.at("freq_hz")) freqs.push_back(f);
    const FrequencyGrid grid(freqs);
    ErrorModel em;
    em.input_box = detail::network_from_json(grid, j.at("input_box"));
    em.output_box = detail::network_from_json(grid, j.at("output_box"));
    em.line_propagation = detail::complex_array_from(j.at("line_propagation"));
    em.reflect_estimate = detail::complex_array_from(j.at("reflect_estimate"));
    const auto& cond = j.at("conditioning");
    em.conditioning.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        em.conditioning[i].line_phase_deg = cond.at("line_phase_deg").at(i).get<double>();
        em.conditioning[i].ill_conditioned = cond.at("ill_conditioned").at(i).get<int>() != 0;
        em.conditioning[i].thru_residual = cond.at("thru_residual").at(i).get<double>();
    }
    return em;
}

} // namespace cryorf
