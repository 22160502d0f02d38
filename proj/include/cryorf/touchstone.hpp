// Touchstone v1 (.s2p) reader/writer.  Two-port only; the v1 column order for
// two-ports is S11 S21 S12 S22.
#pragma once

#include <algorithm>
#include <cctype>
#include <complex>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "two_port.hpp"

namespace cryorf {

enum class TouchstoneFormat { RI, MA, DB };

struct TouchstoneParseError : Error {
    TouchstoneParseError(const std::string& msg, int line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    int line_number;
};

namespace detail {

inline std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

inline double freq_unit_multiplier(const std::string& u, int lineno) {
    if (u == "HZ") return 1.0;
    if (u == "KHZ") return 1e3;
    if (u == "MHZ") return 1e6;
    if (u == "GHZ") return 1e9;
    throw TouchstoneParseError("unknown frequency unit '" + u + "'", lineno);
}

inline Complex value_from_pair(double a, double b, TouchstoneFormat fmt) {
    switch (fmt) {
        case TouchstoneFormat::RI: return {a, b};
        case TouchstoneFormat::MA: return std::polar(a, b * M_PI / 180.0);
        case TouchstoneFormat::DB: return std::polar(std::pow(10.0, a / 20.0), b * M_PI / 180.0);
    }
    return {};
}

} // namespace detail

inline TwoPortNetwork parse_touchstone(const std::string& text) {
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    bool have_option = false;
    double fmult = 1e9;
    TouchstoneFormat fmt = TouchstoneFormat::MA;
    std::vector<double> freqs;
    std::vector<SMatrix> pts;

    while (std::getline(is, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto bang = line.find('!'); bang != std::string::npos) line.erase(bang);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;

        if (line[first] == '#') {
            if (have_option)
                throw TouchstoneParseError("duplicate option line", lineno);
            std::istringstream ls(line.substr(first + 1));
            std::vector<std::string> tok;
            for (std::string t; ls >> t;) tok.push_back(detail::upper(t));
            // Defaults per the v1 spec: GHz S MA R 50.  Tokens may be omitted
            // from the right, but we parse them positionally.
            std::size_t i = 0;
            if (i < tok.size()) fmult = detail::freq_unit_multiplier(tok[i++], lineno);
            if (i < tok.size()) {
                if (tok[i] != "S")
                    throw TouchstoneParseError("unsupported parameter type '" + tok[i] +
                                               "' (only S-parameters)", lineno);
                ++i;
            }
            if (i < tok.size()) {
                if (tok[i] == "RI") fmt = TouchstoneFormat::RI;
                else if (tok[i] == "MA") fmt = TouchstoneFormat::MA;
                else if (tok[i] == "DB") fmt = TouchstoneFormat::DB;
                else throw TouchstoneParseError("unknown data format '" + tok[i] + "'", lineno);
                ++i;
            }
            if (i < tok.size()) {
                if (tok[i] != "R")
                    throw TouchstoneParseError("malformed option line near '" + tok[i] + "'", lineno);
                ++i;
                if (i >= tok.size())
                    throw TouchstoneParseError("option line missing reference impedance", lineno);
                double z0 = 0.0;
                try { z0 = std::stod(tok[i]); } catch (...) {
                    throw TouchstoneParseError("bad reference impedance '" + tok[i] + "'", lineno);
                }
                if (std::abs(z0 - TwoPortNetwork::kReferenceOhms) > 1e-9)
                    throw TouchstoneParseError("unsupported reference impedance (only 50 ohm)", lineno);
                ++i;
            }
            if (i != tok.size())
                throw TouchstoneParseError("trailing tokens on option line", lineno);
            have_option = true;
            continue;
        }

        std::istringstream ls(line);
        std::vector<double> v;
        for (double x; ls >> x;) v.push_back(x);
        std::string trailing;
        if (ls.clear(), ls >> trailing; !trailing.empty())
            throw TouchstoneParseError("non-numeric token '" + trailing + "'", lineno);
        if (v.size() != 9)
            throw TouchstoneParseError("expected 9 columns for a 2-port record, got " +
                                       std::to_string(v.size()), lineno);
        const double f = v[0] * fmult;
        if (!freqs.empty() && f <= freqs.back())
            throw TouchstoneParseError("non-monotone frequency", lineno);
        // v1 two-port order: S11 S21 S12 S22
        SMatrix m;
        m.s11 = detail::value_from_pair(v[1], v[2], fmt);
        m.s21 = detail::value_from_pair(v[3], v[4], fmt);
        m.s12 = detail::value_from_pair(v[5], v[6], fmt);
        m.s22 = detail::value_from_pair(v[7], v[8], fmt);
        freqs.push_back(f);
        pts.push_back(m);
    }
    if (freqs.size() < 2)
        throw TouchstoneParseError("file has fewer than 2 data records", lineno);
    return TwoPortNetwork(FrequencyGrid(std::move(freqs)), std::move(pts));
}

// Writes dB/angle format with 12 significant digits, which round-trips the
// network through parse_touchstone to within 1e-9 (the angle column is the
// limiting one: 9 digits of a near-180-degree angle would only give ~2e-8).
inline std::string write_touchstone(const TwoPortNetwork& n) {
    std::ostringstream os;
    os << "! 2-port S-parameters\n";
    os << "# Hz S DB R 50\n";
    os << std::setprecision(12);
    auto put = [&os](Complex c) {
        const double mag = std::abs(c);
        const double db = (mag > 0.0) ? 20.0 * std::log10(mag) : -400.0;
        const double ang = (mag > 0.0) ? std::arg(c) * 180.0 / M_PI : 0.0;
        os << " " << db << " " << ang;
    };
    for (std::size_t i = 0; i < n.size(); ++i) {
        os << std::setprecision(12) << n.grid()[i];
        const SMatrix& m = n.at(i);
        put(m.s11);
        put(m.s21);
        put(m.s12);
        put(m.s22);
        os << "\n";
    }
    return os.str();
}

inline void save_touchstone(const TwoPortNetwork& n, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << write_touchstone(n);
}

inline TwoPortNetwork load_touchstone(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_touchstone(ss.str());
}

// Reflection-coefficient trace I/O (one complex value per frequency), stored
// as CSV rows freq_hz,re,im.  Used for REFLECT standard measurements.
struct ReflectionTrace {
    FrequencyGrid grid;
    std::vector<Complex> gamma;

    ReflectionTrace() = default;
    ReflectionTrace(FrequencyGrid g, std::vector<Complex> v)
        : grid(std::move(g)), gamma(std::move(v)) {
        if (grid.size() != gamma.size()) throw Error("reflection trace length mismatch");
    }
};

inline std::string write_reflection_csv(const ReflectionTrace& t) {
    std::ostringstream os;
    os << "# reflection coefficient, freq_hz,re,im\n" << std::setprecision(17);
    for (std::size_t i = 0; i < t.grid.size(); ++i)
        os << t.grid[i] << "," << t.gamma[i].real() << "," << t.gamma[i].imag() << "\n";
    return os.str();
}

inline ReflectionTrace parse_reflection_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<double> freqs;
    std::vector<Complex> g;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double f, re, im;
        if (!(ls >> f >> re >> im))
            throw Error("reflection CSV parse error at line " + std::to_string(lineno));
        freqs.push_back(f);
        g.emplace_back(re, im);
    }
    if (freqs.size() < 2) throw Error("reflection CSV has fewer than 2 rows");
    return ReflectionTrace(FrequencyGrid(std::move(freqs)), std::move(g));
}

inline void save_reflection_csv(const ReflectionTrace& t, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << write_reflection_csv(t);
}

inline ReflectionTrace load_reflection_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_reflection_csv(ss.str());
}

} // namespace cryorf
