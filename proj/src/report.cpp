#include "msde/report.hpp"

#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "msde/core.hpp"
#include "msde/io.hpp"
#include "msde/stats.hpp"

namespace msde {

std::string to_string(Metric m) {
    switch (m) {
        case Metric::StrongSupSquare: return "strong-sup-square";
        case Metric::StrongRms: return "strong-rms";
        case Metric::WeakPhi: return "weak-phi";
        case Metric::Dbl: return "dbl";
    }
    return "?";
}

RateFit fit_rate(std::span<const ConvergenceRow> rows) {
    RateFit out;
    std::vector<double> lx, ly;
    for (const auto& r : rows) {
        if (!(r.error > 0.0)) {
            out.warnings.push_back(fmt::format("row at {} dropped from fit: zero error", io::num(r.epsilon)));
            continue;
        }
        lx.push_back(std::log(r.epsilon));
        ly.push_back(std::log(r.error));
    }
    if (lx.size() < 3) {
        throw ContractViolation(fmt::format("fit_rate: need >=3 rows with positive error (have {})", lx.size()));
    }
    const auto fit = stats::least_squares(lx, ly);
    out.slope = fit.slope;
    out.ci_low = fit.ci_low;
    out.ci_high = fit.ci_high;
    out.n_used = fit.n;
    return out;
}

void ConvergenceReport::validate() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!(rows[i].error >= 0.0)) {
            throw ContractViolation(fmt::format("convergence row {} has negative or NaN error", i));
        }
        if (i > 0 && !(rows[i].epsilon < rows[i - 1].epsilon)) {
            throw ContractViolation(fmt::format("convergence rows must have strictly decreasing {}", abscissa));
        }
    }
}

void ConvergenceReport::fit_if_possible() {
    std::size_t positive = 0;
    for (const auto& r : rows) positive += r.error > 0.0 ? 1 : 0;
    if (positive < 3) {
        fit.reset();
        return;
    }
    fit = fit_rate(rows);
    warnings.insert(warnings.end(), fit->warnings.begin(), fit->warnings.end());
}

void ConvergenceReport::write_csv(std::ostream& os) const {
    os << abscissa << ",error,se,n_paths\n";
    for (const auto& r : rows) {
        os << io::num(r.epsilon) << ',' << io::num(r.error) << ',' << io::num(r.se) << ',' << r.n_paths << '\n';
    }
}

std::string ConvergenceReport::sidecar_json(const std::string& config_hash) const {
    nlohmann::ordered_json j;
    j["metric"] = to_string(metric);
    j["abscissa"] = abscissa;
    if (fit) {
        j["slope"] = fit->slope;
        j["ci"] = {fit->ci_low, fit->ci_high};
        j["n_used"] = fit->n_used;
    } else {
        j["slope"] = nullptr;
        j["ci"] = nullptr;
    }
    std::size_t exploded = 0;
    for (const auto& r : rows) exploded += r.n_exploded;
    j["n_exploded"] = exploded;
    j["seeds"] = seeds;
    j["warnings"] = warnings;
    j["config_hash"] = config_hash;
    return j.dump(2) + "\n";
}

}  // namespace msde
