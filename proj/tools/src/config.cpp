#include "config.hpp"

#include <fstream>
#include <set>

#include "matmuon/prng.hpp"

namespace matmuon::cli {

namespace {

using nlohmann::json;

// Strict object access: every key must be consumed, unknown keys are
// rejected with their path.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError("config: " + path_ + " must be an object");
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    const json& require(const std::string& key) {
        const json* v = find(key);
        if (!v) throw ConfigError("config: missing required field " + path_ + "." + key);
        return *v;
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key))
                throw ConfigError("config: unknown key " + path_ + "." + key);
    }

    const std::string& path() const { return path_; }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

double as_double(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError("config: " + where + " must be a number");
    return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError("config: " + where + " must be an integer");
    return v.get<std::int64_t>();
}

std::uint64_t as_seed(const json& v, const std::string& where) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ConfigError("config: " + where + " must be a non-negative integer seed");
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError("config: " + where + " must be a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError("config: " + where + " must be a string");
    return v.get<std::string>();
}

problems::ProblemKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "matrix_regression") return problems::ProblemKind::MatrixRegression;
    if (s == "tanh_regression") return problems::ProblemKind::TanhRegression;
    throw ConfigError("config: " + where + " must be matrix_regression or tanh_regression");
}

optim::Optimizer parse_optimizer(const std::string& s, const std::string& where) {
    if (s == "sgdm") return optim::Optimizer::Sgdm;
    if (s == "muon") return optim::Optimizer::Muon;
    if (s == "mimuon") return optim::Optimizer::MiMuon;
    if (s == "musgd") return optim::Optimizer::MuSgd;
    throw ConfigError("config: " + where + " must be one of sgdm|muon|mimuon|musgd");
}

optim::SwitchMode parse_switch_mode(const std::string& s, const std::string& where) {
    if (s == "exact_gap") return optim::SwitchMode::ExactGap;
    if (s == "frobenius_proxy") return optim::SwitchMode::FrobeniusProxy;
    throw ConfigError("config: " + where + " must be exact_gap or frobenius_proxy");
}

optim::OrthoMode parse_ortho_mode(const std::string& s, const std::string& where) {
    if (s == "exact_svd") return optim::OrthoMode::ExactSvd;
    if (s == "newton_schulz") return optim::OrthoMode::NewtonSchulz;
    throw ConfigError("config: " + where + " must be exact_svd or newton_schulz");
}

ExperimentType parse_type(const std::string& s, const std::string& where) {
    if (s == "train") return ExperimentType::Train;
    if (s == "stability") return ExperimentType::Stability;
    if (s == "probe") return ExperimentType::Probe;
    if (s == "convergence") return ExperimentType::Convergence;
    if (s == "sweep") return ExperimentType::Sweep;
    throw ConfigError("config: " + where + " must be train|stability|probe|convergence|sweep");
}

const char* kind_name(problems::ProblemKind k) {
    return k == problems::ProblemKind::MatrixRegression ? "matrix_regression" : "tanh_regression";
}

const char* switch_mode_name(optim::SwitchMode m) {
    return m == optim::SwitchMode::ExactGap ? "exact_gap" : "frobenius_proxy";
}

const char* ortho_mode_name(optim::OrthoMode m) {
    return m == optim::OrthoMode::ExactSvd ? "exact_svd" : "newton_schulz";
}

const char* type_name(ExperimentType t) {
    switch (t) {
        case ExperimentType::Train: return "train";
        case ExperimentType::Stability: return "stability";
        case ExperimentType::Probe: return "probe";
        case ExperimentType::Convergence: return "convergence";
        case ExperimentType::Sweep: return "sweep";
    }
    return "train";
}

} // namespace

std::string optimizer_name(optim::Optimizer o) {
    switch (o) {
        case optim::Optimizer::Sgdm: return "sgdm";
        case optim::Optimizer::Muon: return "muon";
        case optim::Optimizer::MiMuon: return "mimuon";
        case optim::Optimizer::MuSgd: return "musgd";
    }
    return "mimuon";
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    ObjectReader top(doc, "root");

    {
        ObjectReader problem(top.require("problem"), "problem");
        cfg.kind = parse_kind(as_string(problem.require("kind"), "problem.kind"), "problem.kind");
        cfg.m = static_cast<int>(as_int(problem.require("m"), "problem.m"));
        cfg.n = static_cast<int>(as_int(problem.require("n"), "problem.n"));
        if (cfg.m < 1 || cfg.n < 1)
            throw ConfigError("config: problem.m and problem.n must be positive");
        cfg.noise_sigma = as_double(problem.require("noise_sigma"), "problem.noise_sigma");
        if (cfg.noise_sigma < 0.0)
            throw ConfigError("config: problem.noise_sigma must be >= 0");
        cfg.gt_seed = as_seed(problem.require("gt_seed"), "problem.gt_seed");
        if (const json* v = problem.find("gt_scale"))
            cfg.gt_scale = as_double(*v, "problem.gt_scale");
        problem.finish();
    }

    {
        ObjectReader data(top.require("data"), "data");
        cfg.n_samples = as_int(data.require("n_samples"), "data.n_samples");
        if (cfg.n_samples < 2) throw ConfigError("config: data.n_samples must be >= 2");
        cfg.data_seed = as_seed(data.require("data_seed"), "data.data_seed");
        data.finish();
    }

    {
        ObjectReader opt(top.require("optimizer"), "optimizer");
        cfg.optimizer =
            parse_optimizer(as_string(opt.require("name"), "optimizer.name"), "optimizer.name");
        if (const json* v = opt.find("eta")) cfg.hp.eta = as_double(*v, "optimizer.eta");
        if (const json* v = opt.find("beta")) cfg.hp.beta = as_double(*v, "optimizer.beta");
        if (const json* v = opt.find("lambda")) cfg.hp.lambda = as_double(*v, "optimizer.lambda");
        if (const json* v = opt.find("tau")) cfg.hp.tau = as_double(*v, "optimizer.tau");
        if (const json* v = opt.find("switch_mode"))
            cfg.hp.switch_mode =
                parse_switch_mode(as_string(*v, "optimizer.switch_mode"), "optimizer.switch_mode");
        if (const json* v = opt.find("ortho_mode"))
            cfg.hp.ortho_mode =
                parse_ortho_mode(as_string(*v, "optimizer.ortho_mode"), "optimizer.ortho_mode");
        if (const json* v = opt.find("ns_steps"))
            cfg.hp.ns_steps = static_cast<int>(as_int(*v, "optimizer.ns_steps"));
        if (const json* v = opt.find("musgd_w_mu"))
            cfg.hp.musgd_w_mu = as_double(*v, "optimizer.musgd_w_mu");
        if (const json* v = opt.find("musgd_w_sgd"))
            cfg.hp.musgd_w_sgd = as_double(*v, "optimizer.musgd_w_sgd");
        opt.finish();
        try {
            cfg.hp.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("config: optimizer invalid: ") + e.what());
        }
    }

    {
        ObjectReader run(top.require("run"), "run");
        cfg.steps = as_int(run.require("steps"), "run.steps");
        if (cfg.steps < 0) throw ConfigError("config: run.steps must be >= 0");
        cfg.index_seed = as_seed(run.require("index_seed"), "run.index_seed");
        const json& seeds = run.require("seeds");
        if (!seeds.is_array() || seeds.empty())
            throw ConfigError("config: run.seeds must be a non-empty array");
        for (const json& s : seeds) cfg.seeds.push_back(as_seed(s, "run.seeds[]"));
        if (const json* v = run.find("w0")) {
            ObjectReader w0(*v, "run.w0");
            const std::string kind = as_string(w0.require("kind"), "run.w0.kind");
            if (kind == "zero") {
                cfg.w0 = W0Spec{};
            } else if (kind == "random") {
                cfg.w0.random = true;
                cfg.w0.seed = as_seed(w0.require("seed"), "run.w0.seed");
                cfg.w0.scale = as_double(w0.require("scale"), "run.w0.scale");
            } else {
                throw ConfigError("config: run.w0.kind must be zero or random");
            }
            w0.finish();
        }
        run.finish();
    }

    {
        ObjectReader exp(top.require("experiment"), "experiment");
        cfg.type = parse_type(as_string(exp.require("type"), "experiment.type"), "experiment.type");
        switch (cfg.type) {
            case ExperimentType::Train:
                if (const json* v = exp.find("lemma_mode"))
                    cfg.lemma_mode = as_bool(*v, "experiment.lemma_mode");
                if (const json* v = exp.find("track_momentum_error"))
                    cfg.track_momentum_error = as_bool(*v, "experiment.track_momentum_error");
                if (const json* v = exp.find("dump_dataset"))
                    cfg.dump_dataset = as_bool(*v, "experiment.dump_dataset");
                break;
            case ExperimentType::Stability:
                cfg.replace_index =
                    as_int(exp.require("replace_index"), "experiment.replace_index");
                cfg.replacement_seed =
                    as_seed(exp.require("replacement_seed"), "experiment.replacement_seed");
                if (const json* v = exp.find("compare_with"))
                    cfg.compare_with = parse_optimizer(as_string(*v, "experiment.compare_with"),
                                                       "experiment.compare_with");
                break;
            case ExperimentType::Probe: {
                cfg.probe_pairs = as_int(exp.require("n_pairs"), "experiment.n_pairs");
                if (cfg.probe_pairs < 1)
                    throw ConfigError("config: experiment.n_pairs must be >= 1");
                cfg.probe_m = static_cast<int>(as_int(exp.require("m"), "experiment.m"));
                cfg.probe_n = static_cast<int>(as_int(exp.require("n"), "experiment.n"));
                if (cfg.probe_m < 2 || cfg.probe_n < 2)
                    throw ConfigError("config: probe dimensions must be >= 2");
                cfg.probe_seed = as_seed(exp.require("probe_seed"), "experiment.probe_seed");
                if (const json* v = exp.find("delta_rel"))
                    cfg.probe_delta_rel = as_double(*v, "experiment.delta_rel");
                if (!(cfg.probe_delta_rel > 0.0))
                    throw ConfigError("config: experiment.delta_rel must be > 0");
                break;
            }
            case ExperimentType::Convergence: {
                const json& tv = exp.require("t_values");
                if (!tv.is_array() || tv.empty())
                    throw ConfigError("config: experiment.t_values must be a non-empty array");
                for (const json& v : tv) {
                    const std::int64_t t = as_int(v, "experiment.t_values[]");
                    if (t < 1) throw ConfigError("config: experiment.t_values must be >= 1");
                    cfg.t_values.push_back(t);
                }
                cfg.eta_c = as_double(exp.require("eta_c"), "experiment.eta_c");
                if (!(cfg.eta_c > 0.0)) throw ConfigError("config: experiment.eta_c must be > 0");
                break;
            }
            case ExperimentType::Sweep: {
                const json& taus = exp.require("taus");
                if (!taus.is_array() || taus.empty())
                    throw ConfigError("config: experiment.taus must be a non-empty array");
                for (const json& v : taus) cfg.taus.push_back(as_double(v, "experiment.taus[]"));
                cfg.replace_index =
                    as_int(exp.require("replace_index"), "experiment.replace_index");
                cfg.replacement_seed =
                    as_seed(exp.require("replacement_seed"), "experiment.replacement_seed");
                break;
            }
        }
        exp.finish();
    }

    top.finish();

    if (cfg.type == ExperimentType::Stability || cfg.type == ExperimentType::Sweep) {
        if (cfg.replace_index < 0 || cfg.replace_index >= cfg.n_samples)
            throw ConfigError("config: experiment.replace_index must lie in [0, n_samples)");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(doc);
}

nlohmann::json ExperimentConfig::resolved_json() const {
    json doc;
    doc["problem"] = {{"kind", kind_name(kind)},       {"m", m},
                      {"n", n},                        {"noise_sigma", noise_sigma},
                      {"gt_seed", gt_seed},            {"gt_scale", gt_scale}};
    doc["data"] = {{"n_samples", n_samples}, {"data_seed", data_seed}};
    doc["optimizer"] = {{"name", optimizer_name(optimizer)},
                        {"eta", hp.eta},
                        {"beta", hp.beta},
                        {"lambda", hp.lambda},
                        {"tau", hp.tau},
                        {"switch_mode", switch_mode_name(hp.switch_mode)},
                        {"ortho_mode", ortho_mode_name(hp.ortho_mode)},
                        {"ns_steps", hp.ns_steps},
                        {"musgd_w_mu", hp.musgd_w_mu},
                        {"musgd_w_sgd", hp.musgd_w_sgd}};
    json w0_json;
    if (w0.random)
        w0_json = {{"kind", "random"}, {"seed", w0.seed}, {"scale", w0.scale}};
    else
        w0_json = {{"kind", "zero"}};
    doc["run"] = {{"steps", steps}, {"index_seed", index_seed}, {"seeds", seeds},
                  {"w0", w0_json}};

    json exp;
    exp["type"] = type_name(type);
    switch (type) {
        case ExperimentType::Train:
            exp["lemma_mode"] = lemma_mode;
            exp["track_momentum_error"] = track_momentum_error;
            exp["dump_dataset"] = dump_dataset;
            break;
        case ExperimentType::Stability:
            exp["replace_index"] = replace_index;
            exp["replacement_seed"] = replacement_seed;
            if (compare_with) exp["compare_with"] = optimizer_name(*compare_with);
            break;
        case ExperimentType::Probe:
            exp["n_pairs"] = probe_pairs;
            exp["m"] = probe_m;
            exp["n"] = probe_n;
            exp["probe_seed"] = probe_seed;
            exp["delta_rel"] = probe_delta_rel;
            break;
        case ExperimentType::Convergence:
            exp["t_values"] = t_values;
            exp["eta_c"] = eta_c;
            break;
        case ExperimentType::Sweep:
            exp["taus"] = taus;
            exp["replace_index"] = replace_index;
            exp["replacement_seed"] = replacement_seed;
            break;
    }
    doc["experiment"] = exp;
    return doc;
}

experiments::RunConfig ExperimentConfig::run_config(std::uint64_t seed) const {
    experiments::RunConfig rc;
    rc.problem.kind = kind;
    rc.problem.m = m;
    rc.problem.n = n;
    rc.problem.noise_sigma = noise_sigma;
    rc.problem.ground_truth = problems::make_ground_truth(m, n, gt_seed, gt_scale);
    rc.n_samples = n_samples;
    rc.steps = steps;
    rc.optimizer = optimizer;
    rc.hp = hp;
    if (w0.random) {
        Xoshiro256pp rng(w0.seed + seed);
        rc.w0 = Matrix(m, n);
        for (double& v : rc.w0.data()) v = w0.scale * rng.normal();
    } else {
        rc.w0 = Matrix(m, n);
    }
    rc.data_seed = data_seed + seed;
    rc.index_seed = index_seed + seed;
    rc.lemma_mode = lemma_mode;
    rc.track_momentum_error = track_momentum_error;
    return rc;
}

} // namespace matmuon::cli
