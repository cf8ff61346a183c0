#include "msde/config.hpp"

#include <memory>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "msde/dsl.hpp"
#include "msde/io.hpp"

namespace msde {

namespace {

using Json = nlohmann::ordered_json;
using Compiled = std::shared_ptr<const dsl::Compiled>;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(fmt::format("{}: {}", path, what));
}

void check_keys(const Json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || a == key;
        if (!ok) fail(path, fmt::format("unknown key '{}' (allowed: {})", key, fmt::join(allowed, ", ")));
    }
}

double number(const Json& obj, const std::string& path, std::string_view key) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(path, fmt::format("missing '{}'", key));
    if (!it->is_number()) fail(fmt::format("{}.{}", path, key), "expected a number");
    return it->get<double>();
}

std::optional<double> optional_number(const Json& obj, const std::string& path, std::string_view key) {
    if (!obj.contains(key)) return std::nullopt;
    return number(obj, path, key);
}

std::size_t dimension(const Json& obj, const std::string& path, std::string_view key) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(path, fmt::format("missing '{}'", key));
    if (!it->is_number_unsigned() || it->get<std::size_t>() == 0 || it->get<std::size_t>() > 64) {
        fail(fmt::format("{}.{}", path, key), "expected an integer in [1, 64]");
    }
    return it->get<std::size_t>();
}

Compiled compile(const Json& src, const std::string& path, const dsl::Signature& sig) {
    std::string text;
    if (src.is_string()) {
        text = src.get<std::string>();
    } else if (src.is_number()) {
        text = io::num(src.get<double>());
    } else {
        fail(path, "expected an expression string or a number");
    }
    try {
        return std::make_shared<const dsl::Compiled>(dsl::parse(text, sig));
    } catch (const dsl::ParseError& e) {
        fail(path, e.what());
    } catch (const dsl::EvalError& e) {
        fail(path, e.what());
    }
}

std::vector<Compiled> expr_vector(const Json& obj, const std::string& parent, std::string_view key, std::size_t n,
                                  const dsl::Signature& sig) {
    const std::string path = fmt::format("{}.{}", parent, key);
    const auto it = obj.find(key);
    if (it == obj.end()) fail(parent, fmt::format("missing '{}'", key));
    if (!it->is_array() || it->size() != n) fail(path, fmt::format("expected an array of {} expressions", n));
    std::vector<Compiled> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(compile((*it)[i], fmt::format("{}[{}]", path, i), sig));
    return out;
}

std::vector<Compiled> expr_matrix(const Json& obj, const std::string& parent, std::string_view key, std::size_t n,
                                  const dsl::Signature& sig) {
    const std::string path = fmt::format("{}.{}", parent, key);
    const auto it = obj.find(key);
    if (it == obj.end()) fail(parent, fmt::format("missing '{}'", key));
    if (!it->is_array() || it->size() != n) fail(path, fmt::format("expected {} rows", n));
    std::vector<Compiled> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Json& row = (*it)[i];
        const std::string rp = fmt::format("{}[{}]", path, i);
        if (!row.is_array() || row.size() != n) fail(rp, fmt::format("expected a row of {} expressions", n));
        for (std::size_t j = 0; j < n; ++j) out.push_back(compile(row[j], fmt::format("{}[{}]", rp, j), sig));
    }
    return out;
}

struct Uses {
    bool t = false, x = false, y = false;
};

Uses uses_of(const Json& obj, std::string_view key, const dsl::Signature& sig) {
    Uses u;
    const auto it = obj.find(key);
    if (it == obj.end()) return u;
    auto visit = [&](const Json& e) {
        if (!e.is_string()) return;
        const dsl::Usage g = dsl::usage(dsl::parse(e.get<std::string>(), sig));
        u.t = u.t || g.t;
        u.x = u.x || g.any_x();
        u.y = u.y || g.any_y();
    };
    for (const auto& e : *it) {
        if (e.is_array()) {
            for (const auto& v : e) visit(v);
        } else {
            visit(e);
        }
    }
    return u;
}

ScaleExponents scales_from(const Json& s, const std::string& path, ScaleExponents base) {
    check_keys(s, path, {"alpha", "beta", "gamma", "epsilon"});
    if (auto v = optional_number(s, path, "alpha")) base.alpha = *v;
    if (auto v = optional_number(s, path, "beta")) base.beta = *v;
    if (auto v = optional_number(s, path, "gamma")) base.gamma = *v;
    if (auto v = optional_number(s, path, "epsilon")) base.epsilon = *v;
    try {
        base.validate();
    } catch (const ContractViolation& e) {
        fail(path, e.what());
    }
    return base;
}

void read_meta(const Json& meta, const std::string& path, AssumptionMeta& out) {
    if (!meta.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : meta.items()) {
        const std::string kp = fmt::format("{}.{}", path, key);
        if (key == "flags") {
            if (!value.is_array()) fail(kp, "expected an array of flag names");
            for (const auto& f : value) {
                if (!f.is_string()) fail(kp, "expected flag names");
                try {
                    out.set_flag(f.get<std::string>());
                } catch (const ConfigError& e) {
                    fail(kp, e.what());
                }
            }
            continue;
        }
        if (!value.is_number()) fail(kp, "expected a number");
        try {
            out.set(key, value.get<double>());
        } catch (const ConfigError& e) {
            fail(kp, fmt::format("{} (known: {})", e.what(), fmt::join(AssumptionMeta::known_symbols(), ", ")));
        }
    }
    try {
        out.validate();
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

std::pair<ModelSpec, std::optional<AveragedModel>> builtin_from(const Json& m, const std::string& path) {
    check_keys(m, path, {"builtin", "epsilon", "params"});
    if (!m["builtin"].is_string()) fail(path + ".builtin", "expected a model id");
    const std::string id = m["builtin"].get<std::string>();
    const Json params = m.contains("params") ? m["params"] : Json::object();
    const std::string pp = path + ".params";
    ModelSpec model;
    std::optional<AveragedModel> avg;
    if (id == "example-5-2") {
        check_keys(params, pp, {"a1", "a2", "a3", "a4"});
        Example52Params p;
        if (auto v = optional_number(params, pp, "a1")) p.a1 = *v;
        if (auto v = optional_number(params, pp, "a2")) p.a2 = *v;
        if (auto v = optional_number(params, pp, "a3")) p.a3 = *v;
        if (auto v = optional_number(params, pp, "a4")) p.a4 = *v;
        if (!(p.a1 > 0.0)) fail(pp + ".a1", "must be positive");
        model = example_5_2(p);
        avg = averaged_example_5_2(p);
        if (p.a3 != 0.0 || p.a4 != 0.0) avg.reset();  // closed form only for a3 = a4 = 0
    } else if (id == "linear-ou") {
        check_keys(params, pp, {"slow_rate", "sigma", "fast_rate", "g"});
        LinearOuParams p;
        if (auto v = optional_number(params, pp, "slow_rate")) p.slow_rate = *v;
        if (auto v = optional_number(params, pp, "sigma")) p.sigma = *v;
        if (auto v = optional_number(params, pp, "fast_rate")) p.fast_rate = *v;
        if (auto v = optional_number(params, pp, "g")) p.g = *v;
        if (!(p.fast_rate > 0.0)) fail(pp + ".fast_rate", "must be positive");
        model = linear_ou(p);
        avg = averaged_linear_ou(p);
    } else if (id == "vanderpol") {
        check_keys(params, pp, {"mu", "a", "nu"});
        double mu = 10.0, a = 0.5, nu = 1.0;
        if (auto v = optional_number(params, pp, "mu")) mu = *v;
        if (auto v = optional_number(params, pp, "a")) a = *v;
        if (auto v = optional_number(params, pp, "nu")) nu = *v;
        try {
            model = vanderpol_to_system(mu, a, nu);
        } catch (const ContractViolation& e) {
            fail(pp, e.what());
        }
    } else {
        if (!params.empty()) fail(pp, fmt::format("model '{}' takes no parameters", id));
        model = builtin_model(id);
        if (id == "example-5-1") avg = averaged_example_5_1();
    }
    if (auto eps = optional_number(m, path, "epsilon")) {
        try {
            model = model.with_epsilon(*eps);
        } catch (const ContractViolation& e) {
            fail(path + ".epsilon", e.what());
        }
    }
    return {std::move(model), std::move(avg)};
}

ModelSpec custom_from(const Json& m, const std::string& path) {
    check_keys(m, path, {"id", "d1", "d2", "scales", "f", "sigma", "B", "b", "g", "meta", "forcing_frequencies"});
    ModelSpec model;
    model.id = "custom";
    if (m.contains("id")) {
        if (!m["id"].is_string() || m["id"].get<std::string>().empty()) fail(path + ".id", "expected a name");
        model.id = m["id"].get<std::string>();
    }
    model.d1 = dimension(m, path, "d1");
    model.d2 = dimension(m, path, "d2");
    const std::size_t d1 = model.d1, d2 = model.d2;
    const dsl::Signature sig_f{d1, d2, true, true};
    const dsl::Signature sig_sigma{d1, d2, true, false};
    const dsl::Signature sig_fast{d1, d2, false, true};

    const auto f = expr_vector(m, path, "f", d1, sig_f);
    const auto sigma = expr_matrix(m, path, "sigma", d1, sig_sigma);
    const auto B = expr_vector(m, path, "B", d2, sig_fast);
    const auto g = expr_matrix(m, path, "g", d2, sig_fast);
    model.f = [f](double t, std::span<const double> x, std::span<const double> y, std::span<double> out) {
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = (*f[i])(t, x, y);
    };
    model.sigma = [sigma](double t, std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < sigma.size(); ++i) out[i] = (*sigma[i])(t, x, {});
    };
    model.B = [B](std::span<const double> x, std::span<const double> y, std::span<double> out) {
        for (std::size_t i = 0; i < B.size(); ++i) out[i] = (*B[i])(0.0, x, y);
    };
    model.g = [g](std::span<const double> x, std::span<const double> y, std::span<double> out) {
        for (std::size_t i = 0; i < g.size(); ++i) out[i] = (*g[i])(0.0, x, y);
    };
    if (m.contains("b")) {
        const auto b = expr_vector(m, path, "b", d2, sig_fast);
        model.b = [b](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            for (std::size_t i = 0; i < b.size(); ++i) out[i] = (*b[i])(0.0, x, y);
        };
    }

    const Uses uf = uses_of(m, "f", sig_f), us = uses_of(m, "sigma", sig_sigma);
    const Uses uB = uses_of(m, "B", sig_fast), ug = uses_of(m, "g", sig_fast);
    model.traits.time_independent = !uf.t && !us.t;
    model.traits.sigma_constant = !us.t && !us.x;
    model.traits.fast_independent_of_x = !uB.x && !ug.x;
    model.traits.has_b = static_cast<bool>(model.b);

    if (m.contains("scales")) model.scales = scales_from(m["scales"], path + ".scales", model.scales);
    if (m.contains("meta")) read_meta(m["meta"], path + ".meta", model.meta);
    if (m.contains("forcing_frequencies")) {
        const Json& ff = m["forcing_frequencies"];
        const std::string fp = path + ".forcing_frequencies";
        if (!ff.is_array()) fail(fp, "expected an array of positive numbers");
        for (const auto& w : ff) {
            if (!w.is_number() || !(w.get<double>() > 0.0)) fail(fp, "expected positive numbers");
            model.forcing_frequencies.push_back(w.get<double>());
        }
    }
    if (!model.traits.time_independent && model.forcing_frequencies.empty()) {
        fail(path, "f or sigma depends on t; declare forcing_frequencies");
    }
    try {
        model.validate();
    } catch (const ContractViolation& e) {
        fail(path, e.what());
    }
    return model;
}

AveragedModel averaged_from(const Json& a, const std::string& path, const ModelSpec& model) {
    check_keys(a, path, {"f_bar", "sigma_bar", "lambda1"});
    const dsl::Signature sig{model.d1, model.d2, false, false};
    const auto f = expr_vector(a, path, "f_bar", model.d1, sig);
    const auto s = expr_matrix(a, path, "sigma_bar", model.d1, sig);
    AveragedModel avg;
    avg.id = model.id;
    avg.kind = "analytic";
    avg.d1 = model.d1;
    avg.f_bar = [f](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = (*f[i])(0.0, x, {});
    };
    avg.sigma_bar = [s](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < s.size(); ++i) out[i] = (*s[i])(0.0, x, {});
    };
    avg.sigma_constant = !uses_of(a, "sigma_bar", sig).x;
    avg.lambda1 = optional_number(a, path, "lambda1");
    if (!avg.lambda1) avg.lambda1 = model.meta.get("lambda1");
    return avg;
}

}  // namespace

LoadedConfig load_config_text(std::string_view text, std::string_view origin) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(fmt::format("{}: invalid JSON at byte {}: {}", origin, e.byte, e.what()));
    }
    const std::string root(origin);
    check_keys(doc, root, {"model", "averaged"});
    if (!doc.contains("model")) fail(root, "missing 'model'");
    const Json& m = doc["model"];
    const std::string mp = root + ":model";
    LoadedConfig out;
    if (m.is_object() && m.contains("builtin")) {
        auto [model, avg] = builtin_from(m, mp);
        out.model = std::move(model);
        out.averaged = std::move(avg);
    } else {
        out.model = custom_from(m, mp);
    }
    if (doc.contains("averaged")) out.averaged = averaged_from(doc["averaged"], root + ":averaged", out.model);
    out.canonical = nlohmann::json::parse(text).dump();  // keys sorted
    out.hash = io::hex_digest(out.canonical);
    return out;
}

LoadedConfig load_config_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(fmt::format("cannot read config '{}': {}", path.string(), e.what()));
    }
    return load_config_text(text, path.filename().string());
}

LoadedConfig builtin_config(std::string_view id) {
    Json doc = {{"model", {{"builtin", std::string(id)}}}};
    return load_config_text(doc.dump(), "<builtin>");
}

}  // namespace msde
