#include "aslfit/config.hpp"

#include "aslfit/errors.hpp"
#include "aslfit/units.hpp"

#include <nlohmann/json.hpp>

#include <set>

namespace asl {

namespace {

using json = nlohmann::json;

void reject_unknown(const json &j, const std::set<std::string> &known, const std::string &where)
{
    if (!j.is_object())
        throw ConfigError("config: section '" + where + "' must be an object");
    for (const auto &item : j.items())
        if (!known.count(item.key()))
            throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
}

double num(const json &j, const char *key, double fallback)
{
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_number())
        throw ConfigError(std::string("config: '") + key + "' must be a number");
    return j.at(key).get<double>();
}

int integer(const json &j, const char *key, int fallback)
{
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_number_integer())
        throw ConfigError(std::string("config: '") + key + "' must be an integer");
    return j.at(key).get<int>();
}

bool boolean(const json &j, const char *key, bool fallback)
{
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_boolean())
        throw ConfigError(std::string("config: '") + key + "' must be a boolean");
    return j.at(key).get<bool>();
}

void parse_model(const json &j, ModelDefaults &m)
{
    reject_unknown(j, {"alpha", "lambda", "t1_ms", "t1b_ms"}, "model");
    m.alpha = num(j, "alpha", m.alpha);
    m.lambda = num(j, "lambda", m.lambda);
    m.t1 = units::ms_to_s(num(j, "t1_ms", units::s_to_ms(m.t1)));
    m.t1b = units::ms_to_s(num(j, "t1b_ms", units::s_to_ms(m.t1b)));
}

void parse_solver(const json &j, GnConfig &s)
{
    reject_unknown(j,
                   {"gamma_init", "gamma_final", "gamma_decay", "delta_init", "delta_final",
                    "delta_decay", "gn_steps", "inner_iters_schedule", "rel_tol",
                    "alpha0_over_alpha1", "levenberg_mode", "snr_scaling", "snr_ref", "snr_max",
                    "data_norm_target", "beta_init", "mu", "linesearch_delta", "max_shrinks",
                    "map_scales", "init_cbf", "init_att_s", "eval_every"},
                   "solver");
    s.gamma_init = num(j, "gamma_init", s.gamma_init);
    s.gamma_final = num(j, "gamma_final", s.gamma_final);
    s.gamma_decay = num(j, "gamma_decay", s.gamma_decay);
    s.delta_init = num(j, "delta_init", s.delta_init);
    s.delta_final = num(j, "delta_final", s.delta_final);
    s.delta_decay = num(j, "delta_decay", s.delta_decay);
    s.gn_steps = integer(j, "gn_steps", s.gn_steps);
    if (j.contains("inner_iters_schedule")) {
        if (!j.at("inner_iters_schedule").is_array())
            throw ConfigError("config: inner_iters_schedule must be an array");
        s.inner_iters_schedule.clear();
        for (const auto &e : j.at("inner_iters_schedule"))
            s.inner_iters_schedule.push_back(e.get<int>());
    }
    s.rel_tol = num(j, "rel_tol", s.rel_tol);
    s.alpha0_over_alpha1 = num(j, "alpha0_over_alpha1", s.alpha0_over_alpha1);
    if (j.contains("levenberg_mode")) {
        const std::string mode = j.at("levenberg_mode").get<std::string>();
        if (mode == "identity")
            s.levenberg_mode = GnConfig::Levenberg::kIdentity;
        else if (mode == "jacobian-diagonal")
            s.levenberg_mode = GnConfig::Levenberg::kJacobianDiagonal;
        else
            throw ConfigError("config: levenberg_mode must be 'identity' or 'jacobian-diagonal'");
    }
    s.snr_scaling = boolean(j, "snr_scaling", s.snr_scaling);
    s.snr_ref = num(j, "snr_ref", s.snr_ref);
    s.snr_max = num(j, "snr_max", s.snr_max);
    s.data_norm_target = num(j, "data_norm_target", s.data_norm_target);
    s.beta_init = num(j, "beta_init", s.beta_init);
    s.mu = num(j, "mu", s.mu);
    s.linesearch_delta = num(j, "linesearch_delta", s.linesearch_delta);
    s.max_shrinks = integer(j, "max_shrinks", s.max_shrinks);
    if (j.contains("map_scales")) {
        const auto &a = j.at("map_scales");
        if (!a.is_array() || a.size() != 2)
            throw ConfigError("config: map_scales must be [cbf_scale, att_scale]");
        s.map_scales = {a[0].get<double>(), a[1].get<double>()};
    }
    s.init[0] = units::cbf_to_internal(num(j, "init_cbf", units::cbf_to_external(s.init[0])));
    s.init[1] = num(j, "init_att_s", s.init[1]);
    s.eval_every = integer(j, "eval_every", s.eval_every);
}

void parse_baseline(const json &j, NllsConfig &b)
{
    reject_unknown(j,
                   {"bounds_cbf", "bounds_att_s", "max_iters", "grad_tol", "init_cbf", "init_att_s",
                    "multistart", "seed"},
                   "baseline");
    if (j.contains("bounds_cbf")) {
        const auto &a = j.at("bounds_cbf");
        if (!a.is_array() || a.size() != 2)
            throw ConfigError("config: bounds_cbf must be [lo, hi] in ml/100g/min");
        b.bounds_cbf = {units::cbf_to_internal(a[0].get<double>()),
                        units::cbf_to_internal(a[1].get<double>())};
    }
    if (j.contains("bounds_att_s")) {
        const auto &a = j.at("bounds_att_s");
        if (!a.is_array() || a.size() != 2)
            throw ConfigError("config: bounds_att_s must be [lo, hi] in seconds");
        b.bounds_att = {a[0].get<double>(), a[1].get<double>()};
    }
    b.max_iters = integer(j, "max_iters", b.max_iters);
    b.grad_tol = num(j, "grad_tol", b.grad_tol);
    b.init[0] = units::cbf_to_internal(num(j, "init_cbf", units::cbf_to_external(b.init[0])));
    b.init[1] = num(j, "init_att_s", b.init[1]);
    b.multistart = integer(j, "multistart", b.multistart);
    if (j.contains("seed"))
        b.seed = j.at("seed").get<std::uint64_t>();
}

void parse_phantom(const json &j, PhantomSpec &p)
{
    reject_unknown(j,
                   {"grid", "case", "noise_sigma", "seed", "averages", "averaged", "real_part",
                    "gm_cbf", "wm_cbf", "gm_att_s", "wm_att_s", "gm_m0", "wm_m0", "t1_tissue_s",
                    "pathology_cbf_factor", "pathology_att_s"},
                   "phantom");
    if (j.contains("grid")) {
        const auto &a = j.at("grid");
        if (!a.is_array() || a.size() != 3)
            throw ConfigError("config: grid must be [ni, nj, nk]");
        p.grid = Grid{a[0].get<int>(), a[1].get<int>(), a[2].get<int>()};
    }
    if (j.contains("case")) {
        const std::string c = j.at("case").get<std::string>();
        if (c == "C1")
            p.pathology_case = PathologyCase::C1;
        else if (c == "C2")
            p.pathology_case = PathologyCase::C2;
        else if (c == "C3")
            p.pathology_case = PathologyCase::C3;
        else
            throw ConfigError("config: case must be C1, C2 or C3");
    }
    p.noise_sigma = num(j, "noise_sigma", p.noise_sigma);
    if (j.contains("seed"))
        p.seed = j.at("seed").get<std::uint64_t>();
    p.averages = integer(j, "averages", p.averages);
    p.averaged = boolean(j, "averaged", p.averaged);
    p.real_part = boolean(j, "real_part", p.real_part);
    p.gm_cbf = num(j, "gm_cbf", p.gm_cbf);
    p.wm_cbf = num(j, "wm_cbf", p.wm_cbf);
    p.gm_att = num(j, "gm_att_s", p.gm_att);
    p.wm_att = num(j, "wm_att_s", p.wm_att);
    p.gm_m0 = num(j, "gm_m0", p.gm_m0);
    p.wm_m0 = num(j, "wm_m0", p.wm_m0);
    p.t1_tissue = num(j, "t1_tissue_s", p.t1_tissue);
    p.pathology_cbf_factor = num(j, "pathology_cbf_factor", p.pathology_cbf_factor);
    p.pathology_att = num(j, "pathology_att_s", p.pathology_att);
}

} // namespace

void RunConfig::validate() const
{
    solver.validate();
    baseline.validate();
    phantom.validate();
    if (replica_n < 2)
        throw ConfigError("config: replica_n must be >= 2");
    if (!(model.alpha > 0) || model.alpha > 1 || !(model.lambda > 0) || !(model.t1 > 0) ||
        !(model.t1b > 0))
        throw ConfigError("config: invalid model constants");
}

RunConfig preset_config(const std::string &name)
{
    RunConfig cfg;
    if (name == "paper") {
        cfg.phantom.grid = Grid{72, 60, 60};
        cfg.replica_n = 100;
    } else if (name == "desk") {
        cfg.phantom.grid = Grid{36, 30, 30};
        cfg.replica_n = 20;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
    }
    return cfg;
}

RunConfig parse_config(const std::string &json_text, const RunConfig &base)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    RunConfig cfg = base;
    reject_unknown(j, {"model", "solver", "baseline", "phantom", "replica_n"}, "config root");
    try {
        if (j.contains("model"))
            parse_model(j.at("model"), cfg.model);
        if (j.contains("solver"))
            parse_solver(j.at("solver"), cfg.solver);
        if (j.contains("baseline"))
            parse_baseline(j.at("baseline"), cfg.baseline);
        if (j.contains("phantom"))
            parse_phantom(j.at("phantom"), cfg.phantom);
        if (j.contains("replica_n"))
            cfg.replica_n = j.at("replica_n").get<int>();
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json(const RunConfig &cfg)
{
    json j;
    j["model"] = {{"alpha", cfg.model.alpha},
                  {"lambda", cfg.model.lambda},
                  {"t1_ms", units::s_to_ms(cfg.model.t1)},
                  {"t1b_ms", units::s_to_ms(cfg.model.t1b)}};
    j["solver"] = {
        {"gamma_init", cfg.solver.gamma_init},
        {"gamma_final", cfg.solver.gamma_final},
        {"gamma_decay", cfg.solver.gamma_decay},
        {"delta_init", cfg.solver.delta_init},
        {"delta_final", cfg.solver.delta_final},
        {"delta_decay", cfg.solver.delta_decay},
        {"gn_steps", cfg.solver.gn_steps},
        {"inner_iters_schedule", cfg.solver.schedule()},
        {"rel_tol", cfg.solver.rel_tol},
        {"alpha0_over_alpha1", cfg.solver.alpha0_over_alpha1},
        {"levenberg_mode",
         cfg.solver.levenberg_mode == GnConfig::Levenberg::kIdentity ? "identity"
                                                                     : "jacobian-diagonal"},
        {"snr_scaling", cfg.solver.snr_scaling},
        {"snr_ref", cfg.solver.snr_ref},
        {"snr_max", cfg.solver.snr_max},
        {"data_norm_target", cfg.solver.data_norm_target},
        {"beta_init", cfg.solver.beta_init},
        {"mu", cfg.solver.mu},
        {"linesearch_delta", cfg.solver.linesearch_delta},
        {"max_shrinks", cfg.solver.max_shrinks},
        {"map_scales", cfg.solver.map_scales},
        {"init_cbf", units::cbf_to_external(cfg.solver.init[0])},
        {"init_att_s", cfg.solver.init[1]},
        {"eval_every", cfg.solver.eval_every}};
    j["baseline"] = {{"bounds_cbf",
                      {units::cbf_to_external(cfg.baseline.bounds_cbf[0]),
                       units::cbf_to_external(cfg.baseline.bounds_cbf[1])}},
                     {"bounds_att_s", cfg.baseline.bounds_att},
                     {"max_iters", cfg.baseline.max_iters},
                     {"grad_tol", cfg.baseline.grad_tol},
                     {"init_cbf", units::cbf_to_external(cfg.baseline.init[0])},
                     {"init_att_s", cfg.baseline.init[1]},
                     {"multistart", cfg.baseline.multistart},
                     {"seed", cfg.baseline.seed}};
    const char *case_name = cfg.phantom.pathology_case == PathologyCase::C1   ? "C1"
                            : cfg.phantom.pathology_case == PathologyCase::C2 ? "C2"
                                                                              : "C3";
    j["phantom"] = {{"grid", {cfg.phantom.grid.ni, cfg.phantom.grid.nj, cfg.phantom.grid.nk}},
                    {"case", case_name},
                    {"noise_sigma", cfg.phantom.noise_sigma},
                    {"seed", cfg.phantom.seed},
                    {"averages", cfg.phantom.averages},
                    {"averaged", cfg.phantom.averaged},
                    {"real_part", cfg.phantom.real_part},
                    {"gm_cbf", cfg.phantom.gm_cbf},
                    {"wm_cbf", cfg.phantom.wm_cbf},
                    {"gm_att_s", cfg.phantom.gm_att},
                    {"wm_att_s", cfg.phantom.wm_att},
                    {"gm_m0", cfg.phantom.gm_m0},
                    {"wm_m0", cfg.phantom.wm_m0},
                    {"t1_tissue_s", cfg.phantom.t1_tissue},
                    {"pathology_cbf_factor", cfg.phantom.pathology_cbf_factor},
                    {"pathology_att_s", cfg.phantom.pathology_att}};
    j["replica_n"] = cfg.replica_n;
    return j.dump(2);
}

std::string config_hash(const RunConfig &cfg)
{
    const std::string s = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace asl
