#include "smcl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "smcl/errors.hpp"
#include "smcl/io.hpp"

namespace smcl::config {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

void parse_value(const std::string& v, std::size_t& out) {
    std::size_t pos = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument("expected a non-negative integer");
    out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("expected a non-negative integer");
}

void parse_value(const std::string& v, double& out) {
    std::size_t pos = 0;
    out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("expected a number");
}

void parse_value(const std::string& v, bool& out) {
    if (v == "true" || v == "1" || v == "yes") out = true;
    else if (v == "false" || v == "0" || v == "no") out = false;
    else throw std::invalid_argument("expected true or false");
}

void parse_value(const std::string& v, std::string& out) { out = v; }

void parse_value(const std::string& v, std::vector<double>& out) {
    out.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double x;
        parse_value(trim(item), x);
        out.push_back(x);
    }
}

void parse_value(const std::string& v, smc::Smoothing& out) {
    if (v == "path_space") out = smc::Smoothing::path_space;
    else if (v == "paris") out = smc::Smoothing::paris;
    else throw std::invalid_argument("expected path_space or paris");
}

using Setter = std::function<void(const std::string&)>;

template <class T>
Setter bind(T& field) {
    return [&field](const std::string& v) { parse_value(v, field); };
}

std::map<std::string, std::map<std::string, Setter>> schema(RunConfig& c) {
    return {
        {"data",
         {{"path", [&c](const std::string& v) { c.data_path = v; }},
          {"split_train", bind(c.split[0])},
          {"split_val", bind(c.split[1])},
          {"split_test", bind(c.split[2])},
          {"train_stride", bind(c.train_stride)},
          {"eval_stride", bind(c.eval_stride)}}},
        {"input_model",
         {{"layers", bind(c.gru_layers)},
          {"feature_dim", bind(c.feature_dim)},
          {"head_hidden", bind(c.head_hidden)},
          {"learning_rates", bind(c.input_learning_rates)},
          {"epochs", bind(c.input_epochs)},
          {"batch_size", bind(c.input_batch_size)},
          {"patience", bind(c.input_patience)}}},
        {"ssm",
         {{"state_dim", bind(c.state_dim)},
          {"particles", bind(c.particles)},
          {"paris_k", bind(c.paris_k)},
          {"smoothing", bind(c.smoothing)}}},
        {"training",
         {{"epochs", bind(c.smcl_epochs)},
          {"batch_size", bind(c.smcl_batch_size)},
          {"learning_rate", bind(c.smcl_learning_rate)},
          {"patience", bind(c.smcl_patience)}}},
        {"recursive",
         {{"gamma0", bind(c.gamma0)},
          {"alpha", bind(c.alpha)},
          {"particles", bind(c.recursive_particles)},
          {"paris_k", bind(c.recursive_paris_k)},
          {"record_every", bind(c.record_every)}}},
        {"eval",
         {{"particles", bind(c.eval_particles)},
          {"split", bind(c.eval_split)},
          {"timing", bind(c.timing)},
          {"forecast_windows", bind(c.forecast_windows)}}},
        {"hmm",
         {{"state_dim", bind(c.hmm_state_dim)},
          {"max_iters", bind(c.hmm_max_iters)},
          {"tol", bind(c.hmm_tol)},
          {"inputs", bind(c.hmm_inputs)}}},
        {"run",
         {{"seed", [&c](const std::string& v) {
               std::size_t pos = 0;
               if (v.empty() || v[0] == '-') throw std::invalid_argument("expected an unsigned integer");
               c.seed = std::stoull(v, &pos);
               if (pos != v.size()) throw std::invalid_argument("expected an unsigned integer");
           }},
          {"threads", bind(c.threads)},
          {"out", [&c](const std::string& v) { c.out = v; }}}},
    };
}

}  // namespace

std::string smoothing_name(smc::Smoothing s) { return s == smc::Smoothing::paris ? "paris" : "path_space"; }

void RunConfig::validate() const {
    std::vector<std::string> errs;
    auto positive = [&](std::size_t v, const char* name) {
        if (v == 0) errs.push_back(std::string(name) + " must be positive");
    };
    double sum = 0.0;
    for (double f : split) {
        if (!(f > 0.0)) errs.push_back("data.split fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) errs.push_back("data.split fractions must sum to 1");
    positive(train_stride, "data.train_stride");
    positive(eval_stride, "data.eval_stride");
    positive(gru_layers, "input_model.layers");
    positive(feature_dim, "input_model.feature_dim");
    positive(head_hidden, "input_model.head_hidden");
    if (input_learning_rates.empty()) errs.push_back("input_model.learning_rates must not be empty");
    for (double lr : input_learning_rates)
        if (!(lr > 0.0) || !std::isfinite(lr)) errs.push_back("input_model.learning_rates entries must be positive");
    positive(input_epochs, "input_model.epochs");
    positive(input_batch_size, "input_model.batch_size");
    positive(input_patience, "input_model.patience");
    positive(state_dim, "ssm.state_dim");
    if (particles < 2) errs.push_back("ssm.particles must be at least 2");
    positive(paris_k, "ssm.paris_k");
    positive(smcl_epochs, "training.epochs");
    positive(smcl_batch_size, "training.batch_size");
    if (!(smcl_learning_rate > 0.0) || !std::isfinite(smcl_learning_rate))
        errs.push_back("training.learning_rate must be positive");
    positive(smcl_patience, "training.patience");
    if (!(gamma0 >= 0.0) || !std::isfinite(gamma0)) errs.push_back("recursive.gamma0 must be non-negative");
    if (!(alpha > 0.5 && alpha <= 1.0)) errs.push_back("recursive.alpha must lie in (0.5, 1]");
    if (recursive_particles < 2) errs.push_back("recursive.particles must be at least 2");
    positive(recursive_paris_k, "recursive.paris_k");
    positive(record_every, "recursive.record_every");
    if (eval_particles < 2) errs.push_back("eval.particles must be at least 2");
    if (eval_split != "val" && eval_split != "test") errs.push_back("eval.split must be val or test");
    positive(forecast_windows, "eval.forecast_windows");
    positive(hmm_state_dim, "hmm.state_dim");
    if (!(hmm_tol >= 0.0)) errs.push_back("hmm.tol must be non-negative");
    if (hmm_inputs != "none" && hmm_inputs != "raw" && hmm_inputs != "features")
        errs.push_back("hmm.inputs must be none, raw or features");
    if (!errs.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw ConfigError(msg);
    }
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["data"] = {{"path", data_path.string()},
                 {"split", split},
                 {"train_stride", train_stride},
                 {"eval_stride", eval_stride}};
    j["input_model"] = {{"layers", gru_layers},     {"feature_dim", feature_dim},
                        {"head_hidden", head_hidden}, {"learning_rates", input_learning_rates},
                        {"epochs", input_epochs},    {"batch_size", input_batch_size},
                        {"patience", input_patience}};
    j["ssm"] = {{"state_dim", state_dim},
                {"particles", particles},
                {"paris_k", paris_k},
                {"smoothing", smoothing_name(smoothing)}};
    j["training"] = {{"epochs", smcl_epochs},
                     {"batch_size", smcl_batch_size},
                     {"learning_rate", smcl_learning_rate},
                     {"patience", smcl_patience}};
    j["recursive"] = {{"gamma0", gamma0},
                      {"alpha", alpha},
                      {"particles", recursive_particles},
                      {"paris_k", recursive_paris_k},
                      {"record_every", record_every}};
    j["eval"] = {{"particles", eval_particles}, {"split", eval_split}, {"timing", timing},
                 {"forecast_windows", forecast_windows}};
    j["hmm"] = {{"state_dim", hmm_state_dim}, {"max_iters", hmm_max_iters}, {"tol", hmm_tol}, {"inputs", hmm_inputs}};
    j["run"] = {{"seed", seed}};
    return j;
}

RunConfig parse(const std::string& text, const std::filesystem::path& base_dir) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("invalid configuration:\n  line " + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig c;
    auto sch = schema(c);
    std::vector<std::string> errs;
    for (const auto& [section, keys] : tree) {
        auto s = sch.find(section);
        if (s == sch.end()) {
            errs.push_back(keys.empty() ? "key outside any section: " + section : "unknown section [" + section + "]");
            continue;
        }
        for (const auto& [key, node] : keys) {
            auto k = s->second.find(key);
            if (k == s->second.end()) {
                errs.push_back("unknown key " + section + "." + key);
                continue;
            }
            try {
                k->second(trim(node.data()));
            } catch (const std::exception& e) {
                errs.push_back(section + "." + key + " = '" + node.data() + "': " + e.what());
            }
        }
    }
    if (!errs.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    if (!c.data_path.empty() && c.data_path.is_relative() && !base_dir.empty()) c.data_path = base_dir / c.data_path;
    return c;
}

RunConfig load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const DataError&) {
        throw ConfigError("cannot read configuration file " + path.string());
    }
    return parse(text, path.parent_path());
}

}  // namespace smcl::config
