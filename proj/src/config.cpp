#include "sta/config.hpp"

#include <charconv>
#include <sstream>

#include "sta/errors.hpp"
#include "sta/io.hpp"

namespace sta {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "variant") {
        const auto v = parse_variant(value);
        if (!v) throw ConfigError("variant: expected lstm, sa, ta or sta, got '" + value + "'");
        variant = *v;
    } else if (key == "profile") {
        if (value == "sbu") {
            loss = LossConfig::sbu();
            batch_size = 8;
        } else if (value == "ntu") {
            loss = LossConfig::ntu();
            batch_size = 256;
        } else {
            throw ConfigError("profile: expected sbu or ntu, got '" + value + "'");
        }
        profile = value;
    } else if (key == "lambda1") {
        loss.lambda1 = to_double(key, value);
    } else if (key == "lambda2") {
        loss.lambda2 = to_double(key, value);
    } else if (key == "lambda3") {
        loss.lambda3 = to_double(key, value);
    } else if (key == "spatial_reg") {
        loss.spatial_reg = to_bool(key, value);
    } else if (key == "temporal_reg") {
        loss.temporal_reg = to_bool(key, value);
    } else if (key == "l1_reg") {
        loss.l1_reg = to_bool(key, value);
    } else if (key == "hidden") {
        hidden = to_size(key, value);
    } else if (key == "attn_hidden") {
        attn_hidden = to_size(key, value);
    } else if (key == "score_hidden") {
        score_hidden = to_size(key, value);
    } else if (key == "main_layers") {
        main_layers = to_size(key, value);
    } else if (key == "dropout") {
        dropout = to_double(key, value);
    } else if (key == "batch_size") {
        batch_size = to_size(key, value);
    } else if (key == "n1") {
        n1 = to_size(key, value);
    } else if (key == "n2") {
        n2 = to_size(key, value);
    } else if (key == "clip_norm") {
        clip_norm = to_double(key, value);
    } else if (key == "lr") {
        lr = to_double(key, value);
    } else if (key == "init_stddev") {
        init_stddev = to_double(key, value);
    } else if (key == "temporal_gate_bias") {
        temporal_gate_bias = to_double(key, value);
    } else if (key == "parallel") {
        parallel = to_bool(key, value);
    } else if (key == "seed") {
        seed = to_u64(key, value);
    } else if (key == "data") {
        data = value;
    } else if (key == "format") {
        if (value != "generic" && value != "sbu") throw ConfigError("format: expected generic or sbu, got '" + value + "'");
        format = value;
    } else if (key == "fold") {
        if (value != "none" && value != "all") to_size(key, value);
        fold = value;
    } else if (key == "folds") {
        folds = to_size(key, value);
    } else if (key == "smooth_window") {
        smooth_window = to_size(key, value);
    } else if (key == "center") {
        center = to_bool(key, value);
    } else if (key == "out") {
        out = value;
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }

    if (key == "lambda1" || key == "lambda2" || key == "lambda3") {
        try {
            loss.validate();
        } catch (const ContractError& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
    if (key == "dropout" && (dropout < 0.0 || dropout >= 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (key == "smooth_window" && smooth_window != 0 && smooth_window % 2 == 0) {
        throw ConfigError("smooth_window must be odd");
    }
    if ((key == "hidden" || key == "attn_hidden" || key == "main_layers" || key == "batch_size") &&
        to_size(key, value) == 0) {
        throw ConfigError(key + " must be positive");
    }
}

void RunConfig::apply(const std::vector<std::pair<std::string, std::string>>& settings) {
    for (const auto& [k, v] : settings)
        if (k == "profile") set(k, v);
    for (const auto& [k, v] : settings)
        if (k != "profile") set(k, v);
}

TrainPlan RunConfig::plan() const { return TrainPlan::for_variant(variant, n1, n2, main_layers); }

TrainConfig RunConfig::train_config(const ModelShape& data_shape) const {
    TrainConfig tc;
    tc.shape = data_shape;
    tc.shape.main_hidden = hidden;
    tc.shape.main_layers = main_layers;
    tc.shape.spatial_hidden = attn_hidden;
    tc.shape.temporal_hidden = attn_hidden;
    tc.shape.score_hidden = score_hidden ? score_hidden : attn_hidden;
    tc.loss = loss;
    tc.adam.lr = lr;
    tc.batch_size = batch_size;
    tc.dropout = dropout;
    tc.clip_norm = clip_norm;
    tc.init_stddev = init_stddev;
    tc.temporal_gate_bias = temporal_gate_bias;
    tc.parallel = parallel;
    return tc;
}

std::size_t RunConfig::effective_smooth_window() const {
    if (smooth_window) return smooth_window;
    return format == "sbu" ? 5 : 1;
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "variant = " << variant_name(variant) << '\n'
       << "profile = " << profile << '\n'
       << "lambda1 = " << fmt_double(loss.lambda1) << '\n'
       << "lambda2 = " << fmt_double(loss.lambda2) << '\n'
       << "lambda3 = " << fmt_double(loss.lambda3) << '\n'
       << "spatial_reg = " << (loss.spatial_reg ? "true" : "false") << '\n'
       << "temporal_reg = " << (loss.temporal_reg ? "true" : "false") << '\n'
       << "l1_reg = " << (loss.l1_reg ? "true" : "false") << '\n'
       << "hidden = " << hidden << '\n'
       << "attn_hidden = " << attn_hidden << '\n'
       << "score_hidden = " << score_hidden << '\n'
       << "main_layers = " << main_layers << '\n'
       << "dropout = " << fmt_double(dropout) << '\n'
       << "batch_size = " << batch_size << '\n'
       << "n1 = " << n1 << '\n'
       << "n2 = " << n2 << '\n'
       << "clip_norm = " << fmt_double(clip_norm) << '\n'
       << "lr = " << fmt_double(lr) << '\n'
       << "init_stddev = " << fmt_double(init_stddev) << '\n'
       << "temporal_gate_bias = " << fmt_double(temporal_gate_bias) << '\n'
       << "parallel = " << (parallel ? "true" : "false") << '\n'
       << "seed = " << seed << '\n'
       << "data = " << data << '\n'
       << "format = " << format << '\n'
       << "fold = " << fold << '\n'
       << "folds = " << folds << '\n'
       << "smooth_window = " << smooth_window << '\n'
       << "center = " << (center ? "true" : "false") << '\n'
       << "out = " << out << '\n';
    return os.str();
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        out.emplace_back(key, trim(line.substr(eq + 1)));
    }
    return out;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    RunConfig cfg;
    cfg.apply(parse_config_text(text));
    return cfg;
}

Dataset load_dataset(const std::string& path, const std::string& format, std::size_t smooth_window, bool center) {
    if (path.empty()) throw ConfigError("no dataset path given");
    Dataset data = format == "sbu" ? load_sbu(path) : load_generic(path);
    for (auto& s : data) {
        s.validate();
        if (smooth_window > 1) s = smooth(s, smooth_window);
        if (center) s = center_normalize(s);
    }
    return data;
}

}  // namespace sta
