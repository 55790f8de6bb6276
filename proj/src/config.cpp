#include "tatu/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "tatu/io.hpp"

namespace tatu {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, const std::set<std::string>& known) {
    if (!j.is_object()) throw SchemaError("config section is not an object: " + section);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw SchemaError("unknown config key: " + section + "." + it.key());
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw SchemaError(std::string("bad value for config key: ") + key);
        }
    }
}

std::string accumulation_name(AccumulationMode m) {
    return m == AccumulationMode::undiscounted ? "undiscounted" : "discounted";
}

AccumulationMode accumulation_from(const std::string& s) {
    if (s == "undiscounted") return AccumulationMode::undiscounted;
    if (s == "discounted") return AccumulationMode::discounted;
    throw SchemaError("unknown accumulation mode: " + s);
}

std::string quantifier_name(UncertaintyQuantifier q) {
    return q == UncertaintyQuantifier::mopo ? "mopo" : "morel";
}

std::string action_source_name(ActionSource s) {
    return s == ActionSource::cvae ? "cvae" : "learned_policy";
}

}  // namespace

std::vector<double> default_sweep_grid(const std::string& param) {
    if (param == "h") return {1, 3, 5, 7, 10};
    if (param == "alpha") return {1, 2, 3, 4, 5};
    if (param == "eta") return {0.05, 0.25, 0.5, 0.7, 0.9};
    throw ParameterError("default_sweep_grid: unknown param " + param);
}

void RunConfig::validate() const {
    if (env.type != "pointmass" && env.type != "tabular")
        throw ParameterError("RunConfig: unknown env type " + env.type);
    if (learner.type != "td3bc" && learner.type != "fitted_q")
        throw ParameterError("RunConfig: unknown learner type " + learner.type);
    if (sweep.param != "h" && sweep.param != "alpha" && sweep.param != "eta")
        throw ParameterError("RunConfig: unknown sweep param " + sweep.param);
    if (augment_epochs < 1) throw ParameterError("RunConfig: augment n_epochs must be >= 1");
    truncation.validate();
    AugmentationConfig aug = augment;
    aug.truncation = truncation;
    aug.validate();
}

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["env"] = {{"type", env.type},
                {"tier", env.tier},
                {"n_transitions", env.n_transitions},
                {"noise_scale", env.noise_scale},
                {"n_states", env.n_states},
                {"n_actions", env.n_actions},
                {"gamma", env.gamma},
                {"r_max", env.r_max},
                {"episode_len", env.episode_len}};
    j["dynamics"] = {{"n_total", dynamics.n_total},
                     {"n_elites", dynamics.n_elites},
                     {"validation_size", dynamics.validation_size},
                     {"epochs", dynamics.epochs},
                     {"batch_size", dynamics.batch_size},
                     {"lr", dynamics.lr},
                     {"hidden", dynamics.hidden},
                     {"lv_min", dynamics.lv_min},
                     {"lv_max", dynamics.lv_max}};
    j["truncation"] = {{"alpha", truncation.alpha},
                       {"lambda", truncation.lambda_pen},
                       {"kappa", truncation.kappa},
                       {"gamma", truncation.gamma},
                       {"h", truncation.horizon_h},
                       {"accumulation", accumulation_name(truncation.accumulation)},
                       {"quantifier", quantifier_name(truncation.quantifier.quantifier)},
                       {"frobenius_sum_abs", truncation.quantifier.frobenius_sum_abs},
                       {"stddev_entries", truncation.quantifier.stddev_entries}};
    j["cvae"] = {{"latent_dim", cvae.latent_dim},
                 {"hidden", cvae.hidden},
                 {"epochs", cvae.epochs},
                 {"batch_size", cvae.batch_size},
                 {"lr", cvae.lr}};
    j["augment"] = {{"batch_size", augment.batch_size},
                    {"eta", augment.eta},
                    {"action_source", action_source_name(augment.action_source)},
                    {"n_start_states", augment.n_start_states},
                    {"apply_kappa_to_last_admitted", augment.apply_kappa_to_last_admitted},
                    {"buffer_capacity", augment.buffer_capacity},
                    {"n_threads", augment.n_threads},
                    {"n_epochs", augment_epochs}};
    j["learner"] = {{"type", learner.type},
                    {"steps", learner.steps},
                    {"fitted_q_iters", learner.fitted_q_iters},
                    {"hidden", learner.td3bc.hidden},
                    {"actor_lr", learner.td3bc.actor_lr},
                    {"critic_lr", learner.td3bc.critic_lr},
                    {"gamma", learner.td3bc.gamma},
                    {"tau", learner.td3bc.tau},
                    {"policy_delay", learner.td3bc.policy_delay},
                    {"alpha", learner.td3bc.alpha},
                    {"policy_noise", learner.td3bc.policy_noise},
                    {"noise_clip", learner.td3bc.noise_clip},
                    {"batch_size", learner.td3bc.batch_size}};
    j["sweep"] = {{"param", sweep.param}, {"grid", sweep.grid}};
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "(root)",
               {"seed", "out_dir", "env", "dynamics", "truncation", "cvae", "augment", "learner",
                "sweep"});

    RunConfig c;
    take(j, "seed", c.seed);
    take(j, "out_dir", c.out_dir);

    if (j.contains("env")) {
        const json& s = j["env"];
        check_keys(s, "env",
                   {"type", "tier", "n_transitions", "noise_scale", "n_states", "n_actions",
                    "gamma", "r_max", "episode_len"});
        take(s, "type", c.env.type);
        take(s, "tier", c.env.tier);
        take(s, "n_transitions", c.env.n_transitions);
        take(s, "noise_scale", c.env.noise_scale);
        take(s, "n_states", c.env.n_states);
        take(s, "n_actions", c.env.n_actions);
        take(s, "gamma", c.env.gamma);
        take(s, "r_max", c.env.r_max);
        take(s, "episode_len", c.env.episode_len);
    }
    if (j.contains("dynamics")) {
        const json& s = j["dynamics"];
        check_keys(s, "dynamics",
                   {"n_total", "n_elites", "validation_size", "epochs", "batch_size", "lr",
                    "hidden", "lv_min", "lv_max"});
        take(s, "n_total", c.dynamics.n_total);
        take(s, "n_elites", c.dynamics.n_elites);
        take(s, "validation_size", c.dynamics.validation_size);
        take(s, "epochs", c.dynamics.epochs);
        take(s, "batch_size", c.dynamics.batch_size);
        take(s, "lr", c.dynamics.lr);
        take(s, "hidden", c.dynamics.hidden);
        take(s, "lv_min", c.dynamics.lv_min);
        take(s, "lv_max", c.dynamics.lv_max);
    }
    if (j.contains("truncation")) {
        const json& s = j["truncation"];
        check_keys(s, "truncation",
                   {"alpha", "lambda", "kappa", "gamma", "h", "accumulation", "quantifier",
                    "frobenius_sum_abs", "stddev_entries"});
        take(s, "alpha", c.truncation.alpha);
        take(s, "lambda", c.truncation.lambda_pen);
        take(s, "kappa", c.truncation.kappa);
        take(s, "gamma", c.truncation.gamma);
        take(s, "h", c.truncation.horizon_h);
        if (s.contains("accumulation"))
            c.truncation.accumulation = accumulation_from(s["accumulation"].get<std::string>());
        if (s.contains("quantifier"))
            c.truncation.quantifier.quantifier =
                quantifier_from_string(s["quantifier"].get<std::string>());
        take(s, "frobenius_sum_abs", c.truncation.quantifier.frobenius_sum_abs);
        take(s, "stddev_entries", c.truncation.quantifier.stddev_entries);
    }
    if (j.contains("cvae")) {
        const json& s = j["cvae"];
        check_keys(s, "cvae", {"latent_dim", "hidden", "epochs", "batch_size", "lr"});
        take(s, "latent_dim", c.cvae.latent_dim);
        take(s, "hidden", c.cvae.hidden);
        take(s, "epochs", c.cvae.epochs);
        take(s, "batch_size", c.cvae.batch_size);
        take(s, "lr", c.cvae.lr);
    }
    if (j.contains("augment")) {
        const json& s = j["augment"];
        check_keys(s, "augment",
                   {"batch_size", "eta", "action_source", "n_start_states",
                    "apply_kappa_to_last_admitted", "buffer_capacity", "n_threads", "n_epochs"});
        take(s, "batch_size", c.augment.batch_size);
        take(s, "eta", c.augment.eta);
        if (s.contains("action_source"))
            c.augment.action_source =
                action_source_from_string(s["action_source"].get<std::string>());
        take(s, "n_start_states", c.augment.n_start_states);
        take(s, "apply_kappa_to_last_admitted", c.augment.apply_kappa_to_last_admitted);
        take(s, "buffer_capacity", c.augment.buffer_capacity);
        take(s, "n_threads", c.augment.n_threads);
        take(s, "n_epochs", c.augment_epochs);
    }
    if (j.contains("learner")) {
        const json& s = j["learner"];
        check_keys(s, "learner",
                   {"type", "steps", "fitted_q_iters", "hidden", "actor_lr", "critic_lr", "gamma",
                    "tau", "policy_delay", "alpha", "policy_noise", "noise_clip", "batch_size"});
        take(s, "type", c.learner.type);
        take(s, "steps", c.learner.steps);
        take(s, "fitted_q_iters", c.learner.fitted_q_iters);
        take(s, "hidden", c.learner.td3bc.hidden);
        take(s, "actor_lr", c.learner.td3bc.actor_lr);
        take(s, "critic_lr", c.learner.td3bc.critic_lr);
        take(s, "gamma", c.learner.td3bc.gamma);
        take(s, "tau", c.learner.td3bc.tau);
        take(s, "policy_delay", c.learner.td3bc.policy_delay);
        take(s, "alpha", c.learner.td3bc.alpha);
        take(s, "policy_noise", c.learner.td3bc.policy_noise);
        take(s, "noise_clip", c.learner.td3bc.noise_clip);
        take(s, "batch_size", c.learner.td3bc.batch_size);
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        check_keys(s, "sweep", {"param", "grid"});
        take(s, "param", c.sweep.param);
        take(s, "grid", c.sweep.grid);
    }
    c.augment.truncation = c.truncation;
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FileError("cannot open config file for writing: " + path);
    out << to_json() << "\n";
    if (!out) throw FileError("config write failed: " + path);
}

}  // namespace tatu
