#include "dilo/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "dilo/errors.hpp"

namespace dilo {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key '" + where + "." + it.key() + "'");
    }
}

template <typename T>
void read_field(const json& obj, const std::string& where, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
    }
}

std::pair<int, int> parse_cell(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ConfigError("config: '" + where + "' must be [row, col]");
    return {j[0].get<int>(), j[1].get<int>()};
}

GradMode parse_grad_mode(const std::string& s) {
    if (s == "orthogonal") return GradMode::orthogonal;
    if (s == "full") return GradMode::full;
    if (s == "semi") return GradMode::semi;
    throw ConfigError("config: 'dilo.grad_mode' must be orthogonal, full, or semi");
}

const char* grad_mode_name(GradMode m) {
    switch (m) {
        case GradMode::orthogonal: return "orthogonal";
        case GradMode::full: return "full";
        case GradMode::semi: return "semi";
    }
    return "orthogonal";
}

Optimizer::Kind parse_optimizer(const std::string& s) {
    if (s == "adam") return Optimizer::Kind::adam;
    if (s == "sgd") return Optimizer::Kind::sgd;
    throw ConfigError("config: 'dilo.optimizer' must be adam or sgd");
}

const char* optimizer_name(Optimizer::Kind k) {
    return k == Optimizer::Kind::adam ? "adam" : "sgd";
}

}  // namespace

void RunConfig::validate() const {
    if (env.name != "gridworld" && env.name != "pointmass")
        throw ConfigError("config: 'env.name' must be gridworld or pointmass");
    try {
        if (env.name == "gridworld")
            env.grid.validate();
        else
            env.pointmass.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: env: ") + e.what());
    }
    if (data.n_expert_traj < 1) throw ConfigError("config: 'data.n_expert_traj' must be >= 1");
    if (data.n_offline_expert_traj < 0 || data.n_offline_behavior_traj < 0)
        throw ConfigError("config: offline trajectory counts must be >= 0");
    if (data.n_offline_expert_traj + data.n_offline_behavior_traj < 1)
        throw ConfigError("config: the offline dataset needs at least one trajectory");
    if (data.behavior != "uniform" && data.behavior != "ring")
        throw ConfigError("config: 'data.behavior' must be uniform or ring");
    if (data.behavior == "ring" && env.name != "gridworld")
        throw ConfigError("config: 'data.behavior' ring is gridworld-only");
    if (data.horizon < 2) throw ConfigError("config: 'data.horizon' must be >= 2");
    if (data.expert_path.empty() || data.offline_path.empty())
        throw ConfigError("config: dataset paths must be non-empty");
    dilo.validate();
    for (int h : hidden)
        if (h < 1) throw ConfigError("config: 'dilo.hidden' entries must be >= 1");
    if (hidden.empty()) throw ConfigError("config: 'dilo.hidden' must be non-empty");
    if (policy_steps < 1) throw ConfigError("config: 'dilo.policy_steps' must be >= 1");
    if (eval.n_episodes < 1) throw ConfigError("config: 'eval.n_episodes' must be >= 1");
    if (eval.horizon < 1) throw ConfigError("config: 'eval.horizon' must be >= 1");
    if (!(oracle.tol > 0.0)) throw ConfigError("config: 'oracle.tol' must be > 0");
    if (oracle.max_iterations < 1) throw ConfigError("config: 'oracle.max_iterations' must be >= 1");
    if (oracle.seeds.empty() && !oracle.include_chain)
        throw ConfigError("config: oracle needs at least one instance");
    if (output_dir.empty()) throw ConfigError("config: 'output_dir' must be non-empty");
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    check_keys(root, "<top>", {"env", "data", "dilo", "eval", "oracle", "output_dir"});
    RunConfig cfg;

    if (root.contains("env")) {
        const json& e = root.at("env");
        if (!e.is_object()) throw ConfigError("config: 'env' must be an object");
        read_field(e, "env", "name", cfg.env.name);
        if (cfg.env.name == "pointmass") {
            check_keys(e, "env", {"name", "truncate_steps"});
            read_field(e, "env", "truncate_steps", cfg.env.pointmass.truncate_steps);
        } else {
            check_keys(e, "env",
                       {"name", "width", "height", "slip_prob", "goal", "obstacles", "start",
                        "gamma"});
            Gridworld& g = cfg.env.grid;
            read_field(e, "env", "width", g.width);
            read_field(e, "env", "height", g.height);
            read_field(e, "env", "slip_prob", g.slip_prob);
            read_field(e, "env", "gamma", g.gamma);
            if (e.contains("goal")) g.goal = parse_cell(e.at("goal"), "env.goal");
            if (e.contains("obstacles")) {
                const json& obs = e.at("obstacles");
                if (!obs.is_array()) throw ConfigError("config: 'env.obstacles' must be an array");
                g.obstacles.clear();
                for (const auto& c : obs) g.obstacles.push_back(parse_cell(c, "env.obstacles"));
            }
            if (e.contains("start") && !e.at("start").is_null())
                g.start = parse_cell(e.at("start"), "env.start");
        }
    }

    if (root.contains("data")) {
        const json& d = root.at("data");
        check_keys(d, "data",
                   {"n_expert_traj", "n_offline_expert_traj", "n_offline_behavior_traj",
                    "behavior", "horizon", "seed", "expert_path", "offline_path"});
        read_field(d, "data", "n_expert_traj", cfg.data.n_expert_traj);
        read_field(d, "data", "n_offline_expert_traj", cfg.data.n_offline_expert_traj);
        read_field(d, "data", "n_offline_behavior_traj", cfg.data.n_offline_behavior_traj);
        read_field(d, "data", "behavior", cfg.data.behavior);
        read_field(d, "data", "horizon", cfg.data.horizon);
        read_field(d, "data", "seed", cfg.data.seed);
        read_field(d, "data", "expert_path", cfg.data.expert_path);
        read_field(d, "data", "offline_path", cfg.data.offline_path);
    }

    if (root.contains("dilo")) {
        const json& d = root.at("dilo");
        check_keys(d, "dilo",
                   {"gamma", "beta", "eta", "lambda", "tau", "value_lr", "policy_lr", "clip_max",
                    "batch_size", "steps", "grad_mode", "optimizer", "d0_include_expert", "seed",
                    "hidden", "policy_steps"});
        read_field(d, "dilo", "gamma", cfg.dilo.gamma);
        read_field(d, "dilo", "beta", cfg.dilo.beta);
        read_field(d, "dilo", "eta", cfg.dilo.eta);
        read_field(d, "dilo", "lambda", cfg.dilo.lambda);
        read_field(d, "dilo", "tau", cfg.dilo.tau);
        read_field(d, "dilo", "value_lr", cfg.dilo.value_lr);
        read_field(d, "dilo", "policy_lr", cfg.dilo.policy_lr);
        read_field(d, "dilo", "clip_max", cfg.dilo.clip_max);
        read_field(d, "dilo", "batch_size", cfg.dilo.batch_size);
        read_field(d, "dilo", "steps", cfg.dilo.steps);
        read_field(d, "dilo", "d0_include_expert", cfg.dilo.d0_include_expert);
        read_field(d, "dilo", "seed", cfg.dilo.seed);
        read_field(d, "dilo", "hidden", cfg.hidden);
        read_field(d, "dilo", "policy_steps", cfg.policy_steps);
        if (d.contains("grad_mode")) {
            std::string s;
            read_field(d, "dilo", "grad_mode", s);
            cfg.dilo.grad_mode = parse_grad_mode(s);
        }
        if (d.contains("optimizer")) {
            std::string s;
            read_field(d, "dilo", "optimizer", s);
            cfg.dilo.optimizer = parse_optimizer(s);
        }
    }

    if (root.contains("eval")) {
        const json& e = root.at("eval");
        check_keys(e, "eval", {"n_episodes", "horizon", "seed"});
        read_field(e, "eval", "n_episodes", cfg.eval.n_episodes);
        read_field(e, "eval", "horizon", cfg.eval.horizon);
        read_field(e, "eval", "seed", cfg.eval.seed);
    }

    if (root.contains("oracle")) {
        const json& o = root.at("oracle");
        check_keys(o, "oracle", {"seeds", "tol", "max_iterations", "include_chain"});
        read_field(o, "oracle", "seeds", cfg.oracle.seeds);
        read_field(o, "oracle", "tol", cfg.oracle.tol);
        read_field(o, "oracle", "max_iterations", cfg.oracle.max_iterations);
        read_field(o, "oracle", "include_chain", cfg.oracle.include_chain);
    }

    read_field(root, "<top>", "output_dir", cfg.output_dir);
    cfg.validate();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json env;
    env["name"] = cfg.env.name;
    if (cfg.env.name == "gridworld") {
        const Gridworld& g = cfg.env.grid;
        env["width"] = g.width;
        env["height"] = g.height;
        env["slip_prob"] = g.slip_prob;
        env["gamma"] = g.gamma;
        env["goal"] = json::array({g.goal.first, g.goal.second});
        json obs = json::array();
        for (const auto& c : g.obstacles) obs.push_back(json::array({c.first, c.second}));
        env["obstacles"] = obs;
        env["start"] = g.start ? json::array({g.start->first, g.start->second}) : json();
    } else {
        env["truncate_steps"] = cfg.env.pointmass.truncate_steps;
    }
    json j;
    j["env"] = env;
    j["data"] = {{"n_expert_traj", cfg.data.n_expert_traj},
                 {"n_offline_expert_traj", cfg.data.n_offline_expert_traj},
                 {"n_offline_behavior_traj", cfg.data.n_offline_behavior_traj},
                 {"behavior", cfg.data.behavior},
                 {"horizon", cfg.data.horizon},
                 {"seed", cfg.data.seed},
                 {"expert_path", cfg.data.expert_path},
                 {"offline_path", cfg.data.offline_path}};
    j["dilo"] = {{"gamma", cfg.dilo.gamma},
                 {"beta", cfg.dilo.beta},
                 {"eta", cfg.dilo.eta},
                 {"lambda", cfg.dilo.lambda},
                 {"tau", cfg.dilo.tau},
                 {"value_lr", cfg.dilo.value_lr},
                 {"policy_lr", cfg.dilo.policy_lr},
                 {"clip_max", cfg.dilo.clip_max},
                 {"batch_size", cfg.dilo.batch_size},
                 {"steps", cfg.dilo.steps},
                 {"grad_mode", grad_mode_name(cfg.dilo.grad_mode)},
                 {"optimizer", optimizer_name(cfg.dilo.optimizer)},
                 {"d0_include_expert", cfg.dilo.d0_include_expert},
                 {"seed", cfg.dilo.seed},
                 {"hidden", cfg.hidden},
                 {"policy_steps", cfg.policy_steps}};
    j["eval"] = {{"n_episodes", cfg.eval.n_episodes},
                 {"horizon", cfg.eval.horizon},
                 {"seed", cfg.eval.seed}};
    j["oracle"] = {{"seeds", cfg.oracle.seeds},
                   {"tol", cfg.oracle.tol},
                   {"max_iterations", cfg.oracle.max_iterations},
                   {"include_chain", cfg.oracle.include_chain}};
    j["output_dir"] = cfg.output_dir;
    return j.dump(2) + "\n";
}

std::string resolve_output_dir(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    fs::path p = cfg.output_dir;
    const char* root = std::getenv("DILO_OUTPUT_ROOT");
    if (root && *root && p.is_relative()) p = fs::path(root) / p;
    return p.string();
}

}  // namespace dilo
