#include "afb/run_config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "afb/errors.hpp"

namespace afb {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace

void apply_run_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "epsilon_h") cfg.bank.epsilon_h = to_double(key, value);
    else if (key == "lambda_p") cfg.bank.lambda_p = to_double(key, value);
    else if (key == "epsilon_l") cfg.bank.epsilon_l = to_double(key, value);
    else if (key == "lambda_u") cfg.lambda_u = to_double(key, value);
    else if (key == "budget") cfg.bank.budget = value == "inf" ? std::numeric_limits<std::size_t>::max() : to_size(key, value);
    else if (key == "radius") cfg.refine.radius = to_size(key, value);
    else if (key == "u_threshold") cfg.refine.u_threshold = to_double(key, value);
    else if (key == "stride") cfg.extractor.stride = to_size(key, value);
    else if (key == "patch") cfg.extractor.patch = to_size(key, value);
    else if (key == "d_k") cfg.extractor.d_k = cfg.bank.key_dim = to_size(key, value);
    else if (key == "d_v") cfg.extractor.d_v = cfg.bank.value_dim = to_size(key, value);
    else if (key == "tau_d") cfg.tau_d = to_double(key, value);
    else if (key == "seed") cfg.extractor.proj_seed = to_size(key, value);
    else if (key == "memory_policy") cfg.policy = parse_memory_policy(value);
    else if (key == "absorb_interval") cfg.absorb_interval = to_size(key, value);
    else if (key == "coverage_min") cfg.extractor.coverage_min = to_double(key, value);
    else if (key == "normalize_keys") cfg.bank.normalize_keys = to_bool(key, value);
    else if (key == "absorb_margin") cfg.absorb_margin = to_size(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

PipelineConfig parse_run_config(std::istream& in, const std::string& source) {
    PipelineConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_run_config_key(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path.string());
    return parse_run_config(in, path.string());
}

std::string to_text(const PipelineConfig& cfg) {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "epsilon_h = " << cfg.bank.epsilon_h << "\n"
        << "lambda_p = " << cfg.bank.lambda_p << "\n"
        << "epsilon_l = " << cfg.bank.epsilon_l << "\n"
        << "lambda_u = " << cfg.lambda_u << "\n"
        << "budget = " << cfg.bank.budget << "\n"
        << "radius = " << cfg.refine.radius << "\n"
        << "u_threshold = " << cfg.refine.u_threshold << "\n"
        << "stride = " << cfg.extractor.stride << "\n"
        << "patch = " << cfg.extractor.patch << "\n"
        << "d_k = " << cfg.extractor.d_k << "\n"
        << "d_v = " << cfg.extractor.d_v << "\n"
        << "tau_d = " << cfg.tau_d << "\n"
        << "seed = " << cfg.extractor.proj_seed << "\n"
        << "memory_policy = " << to_string(cfg.policy) << "\n"
        << "absorb_interval = " << cfg.absorb_interval << "\n"
        << "coverage_min = " << cfg.extractor.coverage_min << "\n"
        << "normalize_keys = " << (cfg.bank.normalize_keys ? "true" : "false") << "\n"
        << "absorb_margin = " << cfg.absorb_margin << "\n";
    return out.str();
}

}  // namespace afb
