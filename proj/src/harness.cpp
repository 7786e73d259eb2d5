#include "cuplab/harness.hpp"

#include "cuplab/csv.hpp"
#include "cuplab/rng.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace cuplab {

namespace {

using nlohmann::json;

void reject_unknown(const json& given, const json& known, const std::string& path) {
    if (!given.is_object()) throw ConfigError(path, "expected an object");
    for (const auto& [key, value] : given.items()) {
        if (!known.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
}

double get_number(const json& obj, const char* key, const std::string& path) {
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    return v.get<double>();
}

std::size_t get_count(const json& obj, const char* key, const std::string& path, std::size_t minimum) {
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(minimum)) {
        throw ConfigError(path + "." + key, "expected an integer >= " + std::to_string(minimum));
    }
    return v.get<std::size_t>();
}

std::pair<std::size_t, std::size_t> get_range(const json& obj, const char* key, const std::string& path) {
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
        v[0].get<long long>() < 1 || v[1].get<long long>() < v[0].get<long long>()) {
        throw ConfigError(path + "." + key, "expected [lo, hi] with 1 <= lo <= hi");
    }
    return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
}

json campaign_defaults() {
    const CampaignConfig d;
    return {{"n_cmdps", d.n_cmdps},
            {"pairs_per_cmdp", d.pairs_per_cmdp},
            {"lambdas", d.lambdas},
            {"state_range", {d.state_range.first, d.state_range.second}},
            {"action_range", {d.action_range.first, d.action_range.second}}};
}

json cup_defaults() {
    const CupConfig d;
    return {{"gamma", nullptr},
            {"lambda_gae", d.lambda_gae},
            {"horizon_T", d.horizon_T},
            {"episodes_M", d.episodes_M},
            {"alpha", d.alpha},
            {"beta", d.beta},
            {"nu_init", d.nu_init},
            {"nu_max", d.nu_max},
            {"nu_lr", d.nu_lr},
            {"policy_lr", d.policy_lr},
            {"optimization_epochs", d.optimization_epochs},
            {"minibatch", d.minibatch},
            {"iterations", d.iterations},
            {"cost_limit", nullptr},
            {"initial_logits", nullptr}};
}

json merged(const json& defaults, const json& given, const std::string& path) {
    reject_unknown(given, defaults, path);
    json out = defaults;
    for (const auto& [key, value] : given.items()) out[key] = value;
    return out;
}

CampaignConfig parse_campaign(const json& c) {
    const std::string path = "campaign";
    CampaignConfig out;
    out.n_cmdps = get_count(c, "n_cmdps", path, 1);
    out.pairs_per_cmdp = get_count(c, "pairs_per_cmdp", path, 1);
    const json& lambdas = c.at("lambdas");
    if (!lambdas.is_array()) throw ConfigError(path + ".lambdas", "expected an array");
    if (lambdas.empty()) throw ConfigError(path + ".lambdas", "empty lambdas");
    out.lambdas.clear();
    for (const json& l : lambdas) {
        if (!l.is_number() || !(l.get<double>() >= 0.0 && l.get<double>() < 1.0)) {
            throw ConfigError(path + ".lambdas", "each lambda must lie in [0,1)");
        }
        out.lambdas.push_back(l.get<double>());
    }
    out.state_range = get_range(c, "state_range", path);
    out.action_range = get_range(c, "action_range", path);
    return out;
}

Eigen::MatrixXd parse_logits(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
        throw ConfigError(key, "expected a non-empty table of rows");
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v[0].size()));
    for (std::size_t s = 0; s < v.size(); ++s) {
        if (!v[s].is_array() || v[s].size() != v[0].size()) throw ConfigError(key, "rows differ in length");
        for (std::size_t a = 0; a < v[s].size(); ++a) {
            if (!v[s][a].is_number()) throw ConfigError(key, "expected numbers");
            out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = v[s][a].get<double>();
        }
    }
    return out;
}

CupConfig parse_cup(const json& c, const std::optional<Cmdp>& env) {
    const std::string path = "cup";
    CupConfig out;
    out.gamma = c.at("gamma").is_null() ? (env ? env->gamma : out.gamma) : get_number(c, "gamma", path);
    out.cost_limit =
        c.at("cost_limit").is_null() ? (env ? env->cost_limit : out.cost_limit) : get_number(c, "cost_limit", path);
    out.lambda_gae = get_number(c, "lambda_gae", path);
    out.horizon_T = get_count(c, "horizon_T", path, 1);
    out.episodes_M = get_count(c, "episodes_M", path, 1);
    out.alpha = get_number(c, "alpha", path);
    out.beta = get_number(c, "beta", path);
    out.nu_init = get_number(c, "nu_init", path);
    out.nu_max = get_number(c, "nu_max", path);
    out.nu_lr = get_number(c, "nu_lr", path);
    out.policy_lr = get_number(c, "policy_lr", path);
    out.optimization_epochs = get_count(c, "optimization_epochs", path, 0);
    out.minibatch = get_count(c, "minibatch", path, 1);
    out.iterations = get_count(c, "iterations", path, 0);
    if (!c.at("initial_logits").is_null()) out.initial_logits = parse_logits(c.at("initial_logits"), path + ".initial_logits");
    if (env) {
        try {
            validate_config(out, *env);
        } catch (const PreconditionError& e) {
            throw ConfigError(path, e.what());
        }
    }
    return out;
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

/// Destination for CSV text: a file when a path is set, otherwise the given stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) {
        if (path.empty()) {
            stream_ = &fallback;
            return;
        }
        file_.open(path, std::ios::binary | std::ios::trunc);
        if (!file_) throw ConfigError("output_path", "cannot open '" + path + "' for writing");
        stream_ = &file_;
    }
    std::ostream& get() { return *stream_; }
    bool is_file() const { return file_.is_open(); }

private:
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
};

void stamp_line(std::ostream& out, const CommandOptions& options, const std::string& command) {
    if (options.stamp) out << "# cuplab " << command << ' ' << timestamp() << '\n';
}

std::string baseline_path(const std::string& path) {
    const std::string suffix = ".csv";
    if (path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return path.substr(0, path.size() - suffix.size()) + "_baseline.csv";
    }
    return path + "_baseline.csv";
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw ConfigError("", "cannot open '" + path + "' for writing");
    file << text;
}

json dp_dump(const Cmdp& cmdp, const SoftmaxPolicy& policy, double lambda) {
    const Eigen::MatrixXd pi = policy.distribution();
    json rows = json::array();
    for (Eigen::Index s = 0; s < pi.rows(); ++s) rows.push_back(std::vector<double>(pi.row(s).begin(), pi.row(s).end()));
    return {{"policy", rows},
            {"reward", to_json(solve_policy(cmdp, policy, Signal::reward, lambda))},
            {"cost", to_json(solve_policy(cmdp, policy, Signal::cost, lambda))}};
}

void dump_batch(const std::string& path, const Cmdp& cmdp, const SoftmaxPolicy& policy, const CupConfig& cup) {
    std::ostringstream text;
    write_batch_jsonl(text, sample_trajectories(cmdp, policy, cup.horizon_T, cup.episodes_M, derive_seed(cup.seed, 0)));
    write_file(path, text.str());
}

SoftmaxPolicy initial_policy(const Cmdp& cmdp, const CupConfig& cup) {
    return cup.initial_logits ? SoftmaxPolicy(*cup.initial_logits) : SoftmaxPolicy::uniform(cmdp.n_states, cmdp.n_actions);
}

int cmd_verify_bounds(const ExperimentConfig& config, const CommandOptions& options, std::ostream& out,
                      std::ostream& err) {
    CampaignConfig campaign = config.campaign;
    campaign.seed = config.seed;
    const std::vector<CampaignRow> rows = run_bound_campaign(campaign);
    const auto summary = summarize(rows);

    Sink sink(config.output_path, out);
    stamp_line(sink.get(), options, "verify-bounds");
    write_campaign_csv(sink.get(), rows);
    std::ostream& report = sink.is_file() ? out : err;
    write_campaign_summary(report, summary);

    std::size_t violations = 0;
    for (const auto& [lambda, s] : summary) violations += s.hard_violations();
    report << (violations == 0 ? "verify-bounds: all hard checks passed\n"
                               : "verify-bounds: " + std::to_string(violations) + " rows with hard violations\n");
    return violations == 0 ? exit_ok : exit_violation;
}

void print_tail_means(std::ostream& report, const char* label, const TrainLog& log, double b) {
    const std::size_t n = std::min<std::size_t>(10, log.rows.size());
    double j = 0.0;
    double jc = 0.0;
    for (std::size_t i = log.rows.size() - n; i < log.rows.size(); ++i) {
        j += log.rows[i].j_exact;
        jc += log.rows[i].jc_exact;
    }
    char line[256];
    std::snprintf(line, sizeof line, "%s: final-%zu mean J=%.6f Jc=%.6f (b=%.6f, initial J=%.6f Jc=%.6f)\n", label, n,
                  j / static_cast<double>(n), jc / static_cast<double>(n), b, log.j_initial, log.jc_initial);
    report << line;
}

int cmd_train(const ExperimentConfig& config, const CommandOptions& options, std::ostream& out, std::ostream& err) {
    const Cmdp cmdp = build_env(*config.env);
    if (config.baseline && config.output_path.empty()) {
        throw ConfigError("output_path", "required when baseline is enabled");
    }
    if (options.dump_batch_path) dump_batch(*options.dump_batch_path, cmdp, initial_policy(cmdp, config.cup), config.cup);

    const TrainLog log = train_cup(cmdp, config.cup);
    Sink sink(config.output_path, out);
    stamp_line(sink.get(), options, "train");
    write_train_csv(sink.get(), log);
    std::ostream& report = sink.is_file() ? out : err;
    for (const std::string& w : log.warnings) err << "warning: " << w << '\n';
    if (!log.rows.empty() && log.exact) print_tail_means(report, "cup", log, cmdp.cost_limit);

    if (config.baseline) {
        const TrainLog base = train_lagrangian_baseline(cmdp, config.cup);
        Sink base_sink(baseline_path(config.output_path), out);
        stamp_line(base_sink.get(), options, "train-baseline");
        write_train_csv(base_sink.get(), base);
        for (const std::string& w : base.warnings) err << "warning: " << w << '\n';
        if (!base.rows.empty() && base.exact) print_tail_means(report, "lagrangian", base, cmdp.cost_limit);
    }
    if (options.dump_dp_path) {
        write_file(*options.dump_dp_path, dp_dump(cmdp, log.final_policy, config.cup.lambda_gae).dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_describe(const ExperimentConfig& config, const CommandOptions& options, std::ostream& out) {
    const Cmdp cmdp = build_env(*config.env);
    out << "resolved config:\n" << to_json(config).dump(2) << '\n';
    char line[256];
    std::snprintf(line, sizeof line, "environment: |S|=%zu |A|=%zu gamma=%.6g b=%.6g\n", cmdp.n_states,
                  cmdp.n_actions, cmdp.gamma, cmdp.cost_limit);
    out << line;
    if (cmdp.n_states * cmdp.n_actions <= exact_logging_limit) {
        const SoftmaxPolicy uniform = SoftmaxPolicy::uniform(cmdp.n_states, cmdp.n_actions);
        std::snprintf(line, sizeof line, "uniform policy: J=%.10f Jc=%.10f\n",
                      objective_j(cmdp, uniform, Signal::reward), objective_j(cmdp, uniform, Signal::cost));
        out << line;
    }
    const SoftmaxPolicy start = initial_policy(cmdp, config.cup);
    if (options.dump_dp_path) {
        write_file(*options.dump_dp_path, dp_dump(cmdp, start, config.cup.lambda_gae).dump(2) + "\n");
    }
    if (options.dump_batch_path) dump_batch(*options.dump_batch_path, cmdp, start, config.cup);
    return exit_ok;
}

}  // namespace

ExperimentConfig parse_experiment(const json& document) {
    const json known = {{"env", nullptr},      {"cup", nullptr},         {"campaign", nullptr},
                        {"seed", nullptr},     {"output_path", nullptr}, {"baseline", nullptr}};
    reject_unknown(document, known, "");

    ExperimentConfig out;
    std::optional<Cmdp> cmdp;
    if (document.contains("env")) {
        out.env = resolve_env_spec(document["env"]);
        cmdp = build_env(*out.env);
    }
    if (document.contains("seed")) {
        const json& s = document["seed"];
        if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError("seed", "expected a non-negative integer");
        out.seed = s.get<std::uint64_t>();
    }
    if (document.contains("output_path")) {
        if (!document["output_path"].is_string()) throw ConfigError("output_path", "expected a string");
        out.output_path = document["output_path"].get<std::string>();
    }
    if (document.contains("baseline")) {
        if (!document["baseline"].is_boolean()) throw ConfigError("baseline", "expected true or false");
        out.baseline = document["baseline"].get<bool>();
    }
    out.campaign = parse_campaign(merged(campaign_defaults(), document.value("campaign", json::object()), "campaign"));
    out.campaign.seed = out.seed;
    out.cup = parse_cup(merged(cup_defaults(), document.value("cup", json::object()), "cup"), cmdp);
    out.cup.seed = out.seed;
    return out;
}

nlohmann::json to_json(const ExperimentConfig& config) {
    json doc;
    if (config.env) doc["env"] = *config.env;
    const CupConfig& c = config.cup;
    json logits = nullptr;
    if (c.initial_logits) {
        logits = json::array();
        for (Eigen::Index s = 0; s < c.initial_logits->rows(); ++s) {
            json row = json::array();
            for (Eigen::Index a = 0; a < c.initial_logits->cols(); ++a) row.push_back((*c.initial_logits)(s, a));
            logits.push_back(row);
        }
    }
    doc["cup"] = {{"gamma", c.gamma},
                  {"lambda_gae", c.lambda_gae},
                  {"horizon_T", c.horizon_T},
                  {"episodes_M", c.episodes_M},
                  {"alpha", c.alpha},
                  {"beta", c.beta},
                  {"nu_init", c.nu_init},
                  {"nu_max", c.nu_max},
                  {"nu_lr", c.nu_lr},
                  {"policy_lr", c.policy_lr},
                  {"optimization_epochs", c.optimization_epochs},
                  {"minibatch", c.minibatch},
                  {"iterations", c.iterations},
                  {"cost_limit", c.cost_limit},
                  {"initial_logits", logits}};
    const CampaignConfig& k = config.campaign;
    doc["campaign"] = {{"n_cmdps", k.n_cmdps},
                       {"pairs_per_cmdp", k.pairs_per_cmdp},
                       {"lambdas", k.lambdas},
                       {"state_range", {k.state_range.first, k.state_range.second}},
                       {"action_range", {k.action_range.first, k.action_range.second}}};
    doc["seed"] = config.seed;
    doc["output_path"] = config.output_path;
    doc["baseline"] = config.baseline;
    return doc;
}

ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ConfigError("", "cannot read config '" + path + "'");
    json document;
    try {
        document = json::parse(file);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return parse_experiment(document);
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& out, std::ostream& err) {
    try {
        ExperimentConfig config = load_experiment(options.config_path);
        if (options.output_path) config.output_path = *options.output_path;
        if (command == "verify-bounds") return cmd_verify_bounds(config, options, out, err);
        if (command != "train" && command != "describe") throw ConfigError("", "unknown command '" + command + "'");
        if (!config.env) throw ConfigError("env", "missing environment spec");
        if (command == "train") return cmd_train(config, options, out, err);
        return cmd_describe(config, options, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const PreconditionError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    }
}

}  // namespace cuplab
