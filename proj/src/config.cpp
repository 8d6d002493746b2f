#include "fgcl/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fgcl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + v + "'");
    }
}

uint32_t to_u32(const std::string& key, const std::string& v) {
    const uint64_t x = to_u64(key, v);
    if (x > 0xffffffffULL) throw ConfigError("key '" + key + "': value too large");
    return static_cast<uint32_t>(x);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& registry() {
    static const std::vector<std::pair<std::string, Setter>> reg = {
        {"corpus", [](RunConfig& c, const std::string&, const std::string& v) { c.corpus = v; }},
        {"queries", [](RunConfig& c, const std::string&, const std::string& v) { c.queries = v; }},
        {"qrels", [](RunConfig& c, const std::string&, const std::string& v) { c.qrels = v; }},
        {"workdir", [](RunConfig& c, const std::string&, const std::string& v) { c.workdir = v; }},
        {"layout",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.layout = layout_from_name(v);
         }},
        {"seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.seed = to_u64(k, v);
             c.train.seed = c.seed;
         }},
        {"threads",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = to_u32(k, v); }},
        {"embed_dim",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.dim = to_u32(k, v);
         }},
        {"window",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.window = to_u32(k, v);
         }},
        {"negatives",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.negatives = to_u32(k, v);
         }},
        {"embed_epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.epochs = to_u32(k, v);
         }},
        {"embed_lr",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.lr = to_double(k, v);
         }},
        {"ngram_min",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.ngram_min = to_u32(k, v);
         }},
        {"ngram_max",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.ngram_max = to_u32(k, v);
         }},
        {"buckets",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.buckets = to_u32(k, v);
         }},
        {"min_count",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.min_count = to_u64(k, v);
         }},
        {"walks_per_node",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.walks_per_node = to_u32(k, v);
         }},
        {"walk_max_len",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.walk_max_len = to_u32(k, v);
         }},
        {"edge_dim",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.embed.edge_dim = to_u32(k, v);
         }},
        {"batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.batch_size = to_u32(k, v);
         }},
        {"temperature",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.temperature = to_double(k, v);
         }},
        {"epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.epochs = to_u32(k, v);
         }},
        {"lr",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.lr = to_double(k, v);
         }},
        {"hidden_dims",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.hidden_dims.clear();
             for (const std::string& d : split_list(v))
                 c.train.hidden_dims.push_back(to_u32(k, d));
             if (c.train.hidden_dims.empty()) throw ConfigError("hidden_dims must be non-empty");
         }},
        {"strategy",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.train.augment.strategy = strategy_from_name(v);
         }},
        {"ratio",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const double r = to_double(k, v);
             if (r < 0.0 || r > 1.0) throw ConfigError("ratio must be in [0,1]");
             c.train.augment.ratio = r;
         }},
        {"var_pool",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.train.augment.var_pool = split_list(v);
         }},
        {"num_pool",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.train.augment.num_pool = split_list(v);
         }},
        {"substitution_mode",
         [](RunConfig& c, const std::string&, const std::string& v) {
             if (v == "consistent")
                 c.train.augment.mode = SubstitutionMode::Consistent;
             else if (v == "pernode")
                 c.train.augment.mode = SubstitutionMode::PerNode;
             else
                 throw ConfigError("substitution_mode must be 'consistent' or 'pernode'");
         }},
        {"grid_layouts",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.grid_layouts.clear();
             for (const std::string& l : split_list(v)) c.grid_layouts.push_back(layout_from_name(l));
         }},
        {"grid_strategies",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.grid_strategies.clear();
             for (const std::string& s : split_list(v))
                 c.grid_strategies.push_back(grid_strategy_from_name(s));
         }},
        {"grid_batch_sizes",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.grid_batch_sizes.clear();
             for (const std::string& b : split_list(v)) c.grid_batch_sizes.push_back(to_u32(k, b));
         }},
        {"grid_seeds",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.grid_seeds = to_u32(k, v);
         }},
        {"synth_bases",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.synth.bases = to_u32(k, v);
         }},
        {"synth_variants",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.synth.variants_per_base = to_u32(k, v);
         }},
        {"synth_total",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.synth.total = to_u32(k, v);
         }},
        {"synth_max_depth",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.synth.max_depth = to_u32(k, v);
         }},
        {"synth_zeros",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.synth.zeros_per_query = to_u32(k, v);
         }},
        {"baseline",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.baseline = to_bool(k, v);
         }},
        {"run_tag",
         [](RunConfig& c, const std::string&, const std::string& v) { c.run_tag = v; }},
        {"table_file",
         [](RunConfig& c, const std::string&, const std::string& v) { c.table_file = v; }},
        {"checkpoint_file",
         [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint_file = v; }},
        {"index_file",
         [](RunConfig& c, const std::string&, const std::string& v) { c.index_file = v; }},
        {"run_file",
         [](RunConfig& c, const std::string&, const std::string& v) { c.run_file = v; }},
        {"results_csv",
         [](RunConfig& c, const std::string&, const std::string& v) { c.results_csv = v; }},
        {"loss_csv",
         [](RunConfig& c, const std::string&, const std::string& v) { c.loss_csv = v; }},
    };
    return reg;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, setter] : registry()) k.push_back(key);
        return k;
    }();
    return keys;
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [k, setter] : registry()) {
        if (k == key) {
            setter(cfg, key, value);
            return;
        }
    }
    throw ConfigError("unknown config key: " + key);
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        try {
            apply_config_kv(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentGrid grid_from_config(const RunConfig& cfg) {
    ExperimentGrid grid;
    grid.layouts = cfg.grid_layouts;
    grid.strategies = cfg.grid_strategies;
    grid.batch_sizes = cfg.grid_batch_sizes;
    grid.num_seeds = cfg.grid_seeds;
    grid.seed = cfg.seed;
    grid.train = cfg.train;
    grid.embed = cfg.embed;
    grid.threads = cfg.threads;
    return grid;
}

}  // namespace fgcl
