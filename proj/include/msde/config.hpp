#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "msde/averaging.hpp"
#include "msde/model.hpp"

namespace msde {

/// A model loaded from a JSON configuration, with an optional closed-form
/// averaged model. Two forms are accepted for "model":
///
///   {"builtin": "example-5-2", "epsilon": 0.01, "params": {"a1": 1, ...}}
///
///   {"id": "...", "d1": 1, "d2": 1,
///    "scales": {"alpha": 0.5, "beta": 0, "gamma": 0.5, "epsilon": 0.01},
///    "f": ["expr", ...], "sigma": [["expr", ...], ...],
///    "B": [...], "b": [...], "g": [[...]],
///    "meta": {"eta": 2, ..., "flags": ["hx6"]},
///    "forcing_frequencies": [1.0]}
///
/// f may use t, x1.., y1..; sigma t and x; B, b and g x and y. The optional
/// top-level "averaged" object holds "f_bar" and "sigma_bar" expressions in
/// x and an optional "lambda1". Unknown keys are rejected.
struct LoadedConfig {
    ModelSpec model;
    std::optional<AveragedModel> averaged;
    std::string canonical;  // normalized JSON text
    std::string hash;       // hex digest of canonical
};

[[nodiscard]] LoadedConfig load_config_text(std::string_view text, std::string_view origin = "<config>");
[[nodiscard]] LoadedConfig load_config_file(const std::filesystem::path& path);

/// Config for a registered model at its defaults (hash covers the id only).
[[nodiscard]] LoadedConfig builtin_config(std::string_view id);

}  // namespace msde
