#ifndef SCOREMIX_IO_HPP
#define SCOREMIX_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "analysis.hpp"
#include "critical_points.hpp"
#include "dynamics.hpp"

namespace scoremix {

/// Shortest round-trippable decimal for a double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Trajectory CSV: `tau,x0,...,x{d-1}[,driftsq]`; physical time is written as tau.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr, bool with_drift = true) {
    if (tr.states.empty()) return;
    const auto d = tr.states.front().size();
    out << "tau";
    for (Eigen::Index j = 0; j < d; ++j) out << ",x" << j;
    const bool drift = with_drift && tr.drift_norm_sq.size() == tr.size();
    if (drift) out << ",driftsq";
    out << '\n';
    for (std::size_t i = 0; i < tr.size(); ++i) {
        out << format_double(tr.tau_at(i));
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(tr.states[i][j]);
        if (drift) out << ',' << format_double(tr.drift_norm_sq[i]);
        out << '\n';
    }
}

inline nlohmann::json to_json(const Vec& v) { return std::vector<double>(v.begin(), v.end()); }

inline nlohmann::json to_json(const TrajectoryMeta& m) {
    return {{"lambda", m.lambda}, {"T", m.T}, {"epsilon", m.epsilon}, {"dtau", m.dtau}, {"tau_max", m.tau_max}, {"seed", m.seed}};
}

inline nlohmann::json trajectory_summary(const Trajectory& tr) {
    return {{"mode", to_string(tr.mode)},
            {"meta", to_json(tr.meta)},
            {"samples", tr.size()},
            {"terminal", to_json(tr.terminal())},
            {"warnings", tr.warnings}};
}

inline nlohmann::json to_json(const CriticalPointRecord& r) {
    return {{"x_star", to_json(r.x_star)},
            {"active1", r.active1},
            {"active2", r.active2},
            {"classification", to_string(r.classification)},
            {"phi_value", r.phi_value},
            {"residual", r.residual},
            {"source", r.source}};
}

inline nlohmann::json to_json(const EnumerationResult& res) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : res.records) recs.push_back(to_json(r));
    return {{"records", recs},
            {"diagnostics", res.diagnostics},
            {"strata_solved", res.strata_solved},
            {"strata_inconsistent", res.strata_inconsistent}};
}

/// Report as JSON; per-sample details are included only on request.
inline nlohmann::json to_json(const VerificationReport& r, bool with_details = false) {
    nlohmann::json j = {{"check_name", r.check_name},
                        {"points_tested", r.points_tested},
                        {"worst_violation", r.worst_violation},
                        {"bound_used", r.bound_used},
                        {"pass", r.pass},
                        {"hard_gate", r.hard_gate},
                        {"expected_failure", r.expected_failure},
                        {"notes", r.notes}};
    if (with_details) {
        nlohmann::json det = nlohmann::json::array();
        for (const auto& d : r.details)
            det.push_back({{"x", to_json(d.x)}, {"t", d.t}, {"observed", d.observed}, {"allowed", d.allowed}});
        j["details"] = det;
    }
    return j;
}

inline nlohmann::json to_json(const RateFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"samples", f.taus.size()}, {"excluded", f.excluded}};
}

/// Git blob object id: SHA-1 of "blob <size>\0" followed by the content.
inline std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    const std::string blob = header + content;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) throw Error("SHA-1 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        const unsigned char c = digest[i];
        out.push_back(hex[c >> 4]);
        out.push_back(hex[c & 15]);
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes text to a file, creating parent directories.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path.string());
    out << text;
    if (!out) throw LoadError("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace scoremix

#endif  // SCOREMIX_IO_HPP
