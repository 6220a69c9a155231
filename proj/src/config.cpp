#include "rmt/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rmt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& v) {
    std::array<double, 3> out;
    std::istringstream is(v);
    std::string item;
    int i = 0;
    while (std::getline(is, item, ',')) {
        if (i >= 3) throw std::invalid_argument("config: " + key + ": expected 3 values");
        out[i++] = std::stod(trim(item));
    }
    if (i != 3) throw std::invalid_argument("config: " + key + ": expected 3 values");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: " + key + ": expected true/false");
}

std::string triple_str(const std::array<double, 3>& t) {
    std::ostringstream os;
    os << t[0] << "," << t[1] << "," << t[2];
    return os.str();
}

void check(bool ok, const std::string& key, const std::string& msg) {
    if (!ok) throw std::invalid_argument("config: " + key + ": " + msg);
}

}  // namespace

ModelConfig RunConfig::model_config(std::size_t vocab_size) const {
    ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.context_length = context_length;
    cfg.embed_dim = embed_dim;
    cfg.num_layers = num_layers;
    cfg.num_heads = num_heads;
    return cfg;
}

void RunConfig::validate() const {
    check(!corpus_dir.empty(), "corpus_dir", "required");
    check(eval_fraction > 0.0 && eval_fraction < 1.0, "eval_fraction", "must be in (0,1)");
    check(context_length > 0, "context_length", "must be positive");
    check(embed_dim > 0 && num_heads > 0 && embed_dim % num_heads == 0,
          "embed_dim", "must be positive and divisible by num_heads");
    check(num_layers > 0, "num_layers", "must be positive");
    check(initial_budget >= 1, "initial_budget", "must be >= 1");
    check(min_budget >= 1, "min_budget", "must be >= 1");
    check(budget_decay > 0.0 && budget_decay < 1.0, "budget_decay", "must be in (0,1)");
    check(max_length_reward > 0.0, "max_length_reward", "must be positive");
    for (const auto& [key, dist] : {std::pair{"curriculum_start", curriculum_start},
                                    std::pair{"curriculum_end", curriculum_end}}) {
        double s = 0.0;
        for (double p : dist) {
            check(p >= 0.0, key, "components must be nonnegative");
            s += p;
        }
        check(std::abs(s - 1.0) < 1e-9, key, "must sum to 1");
    }
    check(t1_fraction > 0.0 && t1_fraction < t2_fraction && t2_fraction < 1.0,
          "t1_fraction", "need 0 < t1_fraction < t2_fraction < 1");
    check(q_easy > 0.0 && q_easy < q_hard && q_hard < 1.0, "q_easy",
          "need 0 < q_easy < q_hard < 1");
    check(rho > 0.0 && rho <= 0.1, "rho", "must be in (0, 0.1]");
    check(group_size >= 2, "group_size", "must be >= 2 (advantage whitening)");
    check(reward_weight >= 0.0 && reward_weight <= 1.0, "reward_weight", "must be in [0,1]");
    check(kl_weight >= 0.0, "kl_weight", "must be nonnegative");
    check(ntp_weight >= 0.0, "ntp_weight", "must be nonnegative");
    check(advantage_eps > 0.0, "advantage_eps", "must be positive");
    check(temperature > 0.0, "temperature", "must be positive");
    check(prompt_context_window >= 1, "prompt_context_window", "must be >= 1");
    check(rl_tokens_per_step >= 1, "rl_tokens_per_step", "must be >= 1");
    check(ntp_batch_size >= 1, "ntp_batch_size", "must be >= 1");
    check(epochs >= 1, "epochs", "must be >= 1");
    check(learning_rate > 0.0, "learning_rate", "must be positive");
    check(checkpoint_every >= 1, "checkpoint_every", "must be >= 1");
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "corpus_dir = " << corpus_dir << "\n";
    os << "out_dir = " << out_dir << "\n";
    os << "init_checkpoint = " << init_checkpoint << "\n";
    os << "eval_fraction = " << eval_fraction << "\n";
    os << "context_length = " << context_length << "\n";
    os << "embed_dim = " << embed_dim << "\n";
    os << "num_layers = " << num_layers << "\n";
    os << "num_heads = " << num_heads << "\n";
    os << "initial_budget = " << initial_budget << "\n";
    os << "min_budget = " << min_budget << "\n";
    os << "budget_decay = " << budget_decay << "\n";
    os << "max_length_reward = " << max_length_reward << "\n";
    os << "curriculum_start = " << triple_str(curriculum_start) << "\n";
    os << "curriculum_end = " << triple_str(curriculum_end) << "\n";
    os << "t1_fraction = " << t1_fraction << "\n";
    os << "t2_fraction = " << t2_fraction << "\n";
    os << "q_easy = " << q_easy << "\n";
    os << "q_hard = " << q_hard << "\n";
    os << "rho = " << rho << "\n";
    os << "group_size = " << group_size << "\n";
    os << "reward_weight = " << reward_weight << "\n";
    os << "kl_weight = " << kl_weight << "\n";
    os << "ntp_weight = " << ntp_weight << "\n";
    os << "advantage_eps = " << advantage_eps << "\n";
    os << "temperature = " << temperature << "\n";
    os << "prompt_context_window = " << prompt_context_window << "\n";
    os << "rollout_margin = " << rollout_margin << "\n";
    os << "rl_tokens_per_step = " << rl_tokens_per_step << "\n";
    os << "ntp_batch_size = " << ntp_batch_size << "\n";
    os << "epochs = " << epochs << "\n";
    os << "learning_rate = " << learning_rate << "\n";
    os << "seed = " << seed << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\n";
    os << "eval_positions = " << eval_positions << "\n";
    os << "disable_dtb = " << (disable_dtb ? "true" : "false") << "\n";
    os << "disable_cas = " << (disable_cas ? "true" : "false") << "\n";
    os << "disable_ntp = " << (disable_ntp ? "true" : "false") << "\n";
    return os.str();
}

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;
    auto set_str = [](std::string& f) {
        return [&f](const std::string&, const std::string& v) { f = v; };
    };
    auto set_double = [](double& f) {
        return [&f](const std::string& k, const std::string& v) {
            try { f = std::stod(v); }
            catch (...) { throw std::invalid_argument("config: " + k + ": not a number"); }
        };
    };
    auto set_size = [](std::size_t& f) {
        return [&f](const std::string& k, const std::string& v) {
            try { f = std::stoul(v); }
            catch (...) { throw std::invalid_argument("config: " + k + ": not an integer"); }
        };
    };
    auto set_long = [](long& f) {
        return [&f](const std::string& k, const std::string& v) {
            try { f = std::stol(v); }
            catch (...) { throw std::invalid_argument("config: " + k + ": not an integer"); }
        };
    };
    auto set_u64 = [](std::uint64_t& f) {
        return [&f](const std::string& k, const std::string& v) {
            try { f = std::stoull(v); }
            catch (...) { throw std::invalid_argument("config: " + k + ": not an integer"); }
        };
    };
    auto set_bool = [](bool& f) {
        return [&f](const std::string& k, const std::string& v) { f = parse_bool(k, v); };
    };
    auto set_triple = [](std::array<double, 3>& f) {
        return [&f](const std::string& k, const std::string& v) { f = parse_triple(k, v); };
    };
    setters["corpus_dir"] = set_str(cfg.corpus_dir);
    setters["out_dir"] = set_str(cfg.out_dir);
    setters["init_checkpoint"] = set_str(cfg.init_checkpoint);
    setters["eval_fraction"] = set_double(cfg.eval_fraction);
    setters["context_length"] = set_size(cfg.context_length);
    setters["embed_dim"] = set_size(cfg.embed_dim);
    setters["num_layers"] = set_size(cfg.num_layers);
    setters["num_heads"] = set_size(cfg.num_heads);
    setters["initial_budget"] = set_long(cfg.initial_budget);
    setters["min_budget"] = set_long(cfg.min_budget);
    setters["budget_decay"] = set_double(cfg.budget_decay);
    setters["max_length_reward"] = set_double(cfg.max_length_reward);
    setters["curriculum_start"] = set_triple(cfg.curriculum_start);
    setters["curriculum_end"] = set_triple(cfg.curriculum_end);
    setters["t1_fraction"] = set_double(cfg.t1_fraction);
    setters["t2_fraction"] = set_double(cfg.t2_fraction);
    setters["q_easy"] = set_double(cfg.q_easy);
    setters["q_hard"] = set_double(cfg.q_hard);
    setters["rho"] = set_double(cfg.rho);
    setters["group_size"] = set_size(cfg.group_size);
    setters["reward_weight"] = set_double(cfg.reward_weight);
    setters["kl_weight"] = set_double(cfg.kl_weight);
    setters["ntp_weight"] = set_double(cfg.ntp_weight);
    setters["advantage_eps"] = set_double(cfg.advantage_eps);
    setters["temperature"] = set_double(cfg.temperature);
    setters["prompt_context_window"] = set_size(cfg.prompt_context_window);
    setters["rollout_margin"] = set_size(cfg.rollout_margin);
    setters["rl_tokens_per_step"] = set_size(cfg.rl_tokens_per_step);
    setters["ntp_batch_size"] = set_size(cfg.ntp_batch_size);
    setters["epochs"] = set_size(cfg.epochs);
    setters["learning_rate"] = set_double(cfg.learning_rate);
    setters["seed"] = set_u64(cfg.seed);
    setters["checkpoint_every"] = set_size(cfg.checkpoint_every);
    setters["eval_positions"] = set_size(cfg.eval_positions);
    setters["disable_dtb"] = set_bool(cfg.disable_dtb);
    setters["disable_cas"] = set_bool(cfg.disable_cas);
    setters["disable_ntp"] = set_bool(cfg.disable_ntp);

    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
        it->second(key, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str());
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& module_name,
                          std::uint64_t step) {
    // FNV-1a 64.
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    mix(&master, sizeof(master));
    mix(module_name.data(), module_name.size());
    mix(&step, sizeof(step));
    return h;
}

}  // namespace rmt
