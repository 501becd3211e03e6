#include "sta/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "sta/errors.hpp"
#include "sta/io.hpp"

namespace sta {

namespace fs = std::filesystem;

void SkeletonSequence::validate(std::optional<std::size_t> class_count) const {
    if (joints == 0) throw DataError("sequence has no joints");
    if (persons == 0 || joints % persons != 0) {
        throw DataError(std::to_string(joints) + " joints cannot be split over " + std::to_string(persons) +
                        " persons");
    }
    if (coords.size() % frame_dim() != 0) throw DataError("coordinate count is not a whole number of frames");
    if (valid_len < 1 || valid_len > length()) {
        throw DataError("valid length " + std::to_string(valid_len) + " outside [1, " + std::to_string(length()) +
                        "]");
    }
    if (class_count && label >= *class_count) {
        throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(*class_count) +
                        " classes");
    }
    for (double v : coords) {
        if (!std::isfinite(v)) throw DataError("non-finite coordinate");
    }
}

std::size_t class_count(std::span<const SkeletonSequence> seqs) {
    std::size_t c = 0;
    for (const auto& s : seqs) c = std::max(c, s.label + 1);
    return c;
}

// ---- generic format --------------------------------------------------------

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::string where(const fs::path& path, std::size_t line_no) {
    return path.string() + ":" + std::to_string(line_no);
}

long long parse_int(std::string_view tok, const fs::path& path, std::size_t line_no) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError(where(path, line_no) + ": expected an integer, got '" + std::string(tok) + "'");
    }
    return v;
}

double parse_double(std::string_view tok, const fs::path& path, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError(where(path, line_no) + ": expected a number, got '" + std::string(tok) + "'");
    }
    if (!std::isfinite(v)) throw DataError(where(path, line_no) + ": non-finite coordinate");
    return v;
}

Dataset load_generic_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    Dataset out;
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&](std::vector<std::string_view>& toks) {
        while (std::getline(in, line)) {
            ++line_no;
            toks = split_ws(line);
            if (!toks.empty() && toks.front().front() != '#') return true;
        }
        return false;
    };
    std::vector<std::string_view> toks;
    while (next_line(toks)) {
        if (toks.size() != 4 && toks.size() != 6) {
            throw ParseError(where(path, line_no) + ": header must be 'T K P label [subject_a subject_b]'");
        }
        const long long t = parse_int(toks[0], path, line_no);
        const long long k = parse_int(toks[1], path, line_no);
        const long long p = parse_int(toks[2], path, line_no);
        const long long label = parse_int(toks[3], path, line_no);
        if (t < 1 || k < 1 || p < 1 || label < 0) {
            throw ParseError(where(path, line_no) + ": header values out of range");
        }
        if (k % p != 0) throw ParseError(where(path, line_no) + ": K is not a multiple of P");
        SkeletonSequence seq;
        seq.joints = static_cast<std::size_t>(k);
        seq.persons = static_cast<std::size_t>(p);
        seq.label = static_cast<std::size_t>(label);
        seq.valid_len = static_cast<std::size_t>(t);
        if (toks.size() == 6) {
            seq.subjects = std::make_pair(static_cast<int>(parse_int(toks[4], path, line_no)),
                                          static_cast<int>(parse_int(toks[5], path, line_no)));
        }
        const std::size_t width = seq.frame_dim();
        seq.coords.reserve(width * seq.valid_len);
        for (long long row = 0; row < t; ++row) {
            if (!next_line(toks)) {
                throw ParseError(where(path, line_no) + ": expected " + std::to_string(t) + " frame rows, found " +
                                 std::to_string(row));
            }
            if (toks.size() != width) {
                throw ParseError(where(path, line_no) + ": expected " + std::to_string(width) + " values, found " +
                                 std::to_string(toks.size()));
            }
            for (auto tok : toks) seq.coords.push_back(parse_double(tok, path, line_no));
        }
        out.push_back(std::move(seq));
    }
    if (out.empty()) throw ParseError(path.string() + ": no sequences");
    return out;
}

}  // namespace

Dataset load_generic(const fs::path& path) {
    if (!fs::is_directory(path)) return load_generic_file(path);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    Dataset out;
    for (const auto& f : files) {
        auto part = load_generic_file(f);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    if (out.empty()) throw ParseError(path.string() + ": no sequence files");
    return out;
}

void save_generic(const fs::path& path, std::span<const SkeletonSequence> seqs) {
    std::ostringstream os;
    char buf[32];
    for (const auto& s : seqs) {
        s.validate();
        os << s.valid_len << ' ' << s.joints << ' ' << s.persons << ' ' << s.label;
        if (s.subjects) os << ' ' << s.subjects->first << ' ' << s.subjects->second;
        os << '\n';
        for (std::size_t t = 0; t < s.valid_len; ++t) {
            const auto f = s.frame(t);
            for (std::size_t i = 0; i < f.size(); ++i) {
                // Shortest representation that round-trips exactly.
                const auto res = std::to_chars(buf, buf + sizeof buf, f[i]);
                if (i) os << ' ';
                os.write(buf, res.ptr - buf);
            }
            os << '\n';
        }
    }
    write_file_atomic(path, os.str());
}

// ---- SBU -------------------------------------------------------------------

namespace {

constexpr std::size_t kSbuFields = 1 + kSbuPersons * kSbuJointsPerPerson * 3;

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<std::pair<int, int>> parse_pair(const std::string& name) {
    static const std::regex re(R"(s(\d+)s(\d+))");
    std::smatch m;
    if (!std::regex_match(name, m, re)) return std::nullopt;
    return std::make_pair(std::stoi(m[1]), std::stoi(m[2]));
}

std::optional<std::size_t> parse_class(const std::string& name) {
    static const std::regex re(R"(\d+)");
    if (!std::regex_match(name, re)) return std::nullopt;
    const int c = std::stoi(name);
    if (c < 1 || c > static_cast<int>(kSbuClasses)) return std::nullopt;
    return static_cast<std::size_t>(c - 1);
}

SkeletonSequence load_sbu_file(const fs::path& file, std::size_t label, std::optional<std::pair<int, int>> pair) {
    std::ifstream in(file);
    if (!in) throw LayoutError("cannot open " + file.string());
    SkeletonSequence seq;
    seq.joints = kSbuPersons * kSbuJointsPerPerson;
    seq.persons = kSbuPersons;
    seq.label = label;
    seq.subjects = pair;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            auto tok = rest.substr(0, comma);
            while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
            while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
            fields.push_back(tok);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != kSbuFields) {
            throw ParseError(where(file, line_no) + ": expected " + std::to_string(kSbuFields) + " fields, found " +
                             std::to_string(fields.size()));
        }
        parse_double(fields[0], file, line_no);
        for (std::size_t i = 1; i < fields.size(); ++i) seq.coords.push_back(parse_double(fields[i], file, line_no));
    }
    seq.valid_len = seq.length();
    if (seq.valid_len == 0) throw ParseError(file.string() + ": no frames");
    return seq;
}

}  // namespace

Dataset load_sbu(const fs::path& root) {
    if (!fs::is_directory(root)) throw LayoutError(root.string() + " is not a directory");
    const auto top = sorted_subdirs(root);
    if (top.empty()) throw LayoutError(root.string() + ": no class directories");
    const bool pair_major = parse_pair(top.front().filename().string()).has_value();

    // (label, pair, run directory)
    struct Entry {
        std::size_t label;
        std::optional<std::pair<int, int>> pair;
        fs::path run;
    };
    std::vector<Entry> entries;
    std::set<std::size_t> labels;
    for (const auto& outer : top) {
        for (const auto& inner : sorted_subdirs(outer)) {
            const auto& class_dir = pair_major ? inner : outer;
            const auto& pair_dir = pair_major ? outer : inner;
            const auto label = parse_class(class_dir.filename().string());
            if (!label) throw LayoutError("not a class directory (01..08): " + class_dir.string());
            labels.insert(*label);
            for (const auto& run : sorted_subdirs(inner)) {
                entries.push_back({*label, parse_pair(pair_dir.filename().string()), run});
            }
        }
        if (!pair_major && !parse_class(outer.filename().string())) {
            throw LayoutError("not a class directory (01..08): " + outer.string());
        }
    }
    if (labels.empty()) throw LayoutError(root.string() + ": no class directories");
    for (std::size_t c = 0; c <= *labels.rbegin(); ++c) {
        if (!labels.contains(c)) {
            throw LayoutError(root.string() + ": missing class directory " + std::to_string(c + 1));
        }
    }

    Dataset out;
    for (const auto& e : entries) {
        const auto file = e.run / "skeleton.txt";
        if (!fs::is_regular_file(file)) throw LayoutError("missing " + file.string());
        out.push_back(load_sbu_file(file, e.label, e.pair));
    }
    if (out.empty()) throw LayoutError(root.string() + ": no sequences");
    return out;
}

void save_sbu(const fs::path& root, std::span<const SkeletonSequence> seqs) {
    std::map<std::string, std::size_t> runs;
    for (const auto& seq : seqs) {
        seq.validate(kSbuClasses);
        if (seq.joints != kSbuPersons * kSbuJointsPerPerson || seq.persons != kSbuPersons) {
            throw ContractError("SBU layout needs 30 joints of 2 persons, got " + std::to_string(seq.joints));
        }
        const auto [sa, sb] = seq.subjects.value_or(std::make_pair(1, 2));
        char pair[32];
        std::snprintf(pair, sizeof pair, "s%02ds%02d", sa, sb);
        char cls[8];
        std::snprintf(cls, sizeof cls, "%02zu", seq.label + 1);
        const std::string key = std::string(cls) + "/" + pair;
        char run[8];
        std::snprintf(run, sizeof run, "%03zu", ++runs[key]);
        std::string text;
        char buf[32];
        for (std::size_t t = 0; t < seq.valid_len; ++t) {
            text += std::to_string(t + 1);
            for (double v : seq.frame(t)) {
                const auto r = std::to_chars(buf, buf + sizeof buf, v);
                text += ',';
                text.append(buf, r.ptr);
            }
            text += '\n';
        }
        const fs::path dir = root / cls / pair / run;
        fs::create_directories(dir);
        write_file_atomic(dir / "skeleton.txt", text);
    }
}

// ---- preprocessing -----------------------------------------------------------

SkeletonSequence smooth(const SkeletonSequence& seq, std::size_t window) {
    if (window == 0 || window % 2 == 0) {
        throw ContractError("smooth: window must be a positive odd integer, got " + std::to_string(window));
    }
    SkeletonSequence out = seq;
    if (window == 1) return out;
    const auto half = static_cast<long long>(window / 2);
    const auto last = static_cast<long long>(seq.valid_len) - 1;
    const std::size_t width = seq.frame_dim();
    for (long long t = 0; t <= last; ++t) {
        auto dst = out.frame(static_cast<std::size_t>(t));
        for (std::size_t i = 0; i < width; ++i) {
            double s = 0.0;
            for (long long o = -half; o <= half; ++o) {
                const long long src = std::clamp(t + o, 0LL, last);
                s += seq.frame(static_cast<std::size_t>(src))[i];
            }
            dst[i] = s / static_cast<double>(window);
        }
    }
    return out;
}

SkeletonSequence center_normalize(const SkeletonSequence& seq) {
    SkeletonSequence out = seq;
    double center[3] = {0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < seq.joints; ++j)
        for (std::size_t a = 0; a < 3; ++a) center[a] += seq.at(0, j, a);
    for (double& c : center) c /= static_cast<double>(seq.joints);
    for (std::size_t t = 0; t < seq.valid_len; ++t)
        for (std::size_t j = 0; j < seq.joints; ++j)
            for (std::size_t a = 0; a < 3; ++a) out.at(t, j, a) = seq.at(t, j, a) - center[a];
    return out;
}

// ---- synthetic -------------------------------------------------------------

SyntheticConfig one_joint_per_class(std::size_t n_classes, std::size_t joints) {
    SyntheticConfig cfg;
    cfg.n_classes = n_classes;
    cfg.joints = joints;
    cfg.active_joints.clear();
    for (std::size_t c = 0; c < n_classes; ++c) cfg.active_joints.push_back({c % joints});
    return cfg;
}

Dataset gen_synthetic(const SyntheticConfig& cfg) {
    if (cfg.n_classes == 0 || cfg.joints == 0) throw ContractError("gen_synthetic: need classes and joints");
    if (cfg.min_len < 1 || cfg.max_len < cfg.min_len) throw ContractError("gen_synthetic: bad length range");
    if (cfg.active_joints.size() != cfg.n_classes) {
        throw ContractError("gen_synthetic: active joint sets must be given for every class");
    }
    if (cfg.noise_sigma < 0.0) throw ContractError("gen_synthetic: negative noise");
    std::vector<std::vector<bool>> active(cfg.n_classes, std::vector<bool>(cfg.joints, false));
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        for (std::size_t j : cfg.active_joints[c]) {
            if (j >= cfg.joints) {
                throw ContractError("gen_synthetic: active joint " + std::to_string(j) + " >= K=" +
                                    std::to_string(cfg.joints));
            }
            active[c][j] = true;
        }
    }

    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> length(cfg.min_len, cfg.max_len);
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset out;
    out.reserve(cfg.n_sequences);
    for (std::size_t n = 0; n < cfg.n_sequences; ++n) {
        SkeletonSequence s;
        s.joints = cfg.joints;
        s.label = n % cfg.n_classes;
        s.valid_len = length(rng);
        s.coords.assign(s.valid_len * s.frame_dim(), 0.0);
        const double offset = phase(rng);
        // Class c oscillates with period 8 / (c + 1) frames.
        const double omega = two_pi * static_cast<double>(s.label + 1) / 8.0;
        const double class_shift = std::numbers::pi * static_cast<double>(s.label) / (2.0 * cfg.n_classes);
        for (std::size_t t = 0; t < s.valid_len; ++t) {
            for (std::size_t j = 0; j < s.joints; ++j) {
                for (std::size_t a = 0; a < 3; ++a) {
                    double v;
                    if (active[s.label][j]) {
                        v = cfg.amplitude * std::sin(omega * static_cast<double>(t) + offset + class_shift +
                                                     two_pi * static_cast<double>(a) / 3.0);
                    } else {
                        v = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * noise(rng) : 0.0;
                    }
                    s.at(t, j, a) = v;
                }
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---- folds -----------------------------------------------------------------

std::vector<std::size_t> FoldSplit::members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldSplit::complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(i);
    return out;
}

FoldSplit split_folds(std::span<const SkeletonSequence> seqs, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ContractError("split_folds: need at least 2 folds");
    if (seqs.size() < k) throw ContractError("split_folds: fewer sequences than folds");
    const auto with_subjects =
        static_cast<std::size_t>(std::count_if(seqs.begin(), seqs.end(), [](const auto& s) { return s.subjects; }));
    if (with_subjects != 0 && with_subjects != seqs.size()) {
        throw ContractError("split_folds: subject ids present on only some sequences");
    }
    std::mt19937_64 rng(seed);
    FoldSplit split;
    split.folds = k;
    split.fold_of.assign(seqs.size(), 0);

    if (with_subjects) {
        std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            auto [a, b] = *seqs[i].subjects;
            groups[{std::min(a, b), std::max(a, b)}].push_back(i);
        }
        if (groups.size() < k) {
            throw ContractError("split_folds: " + std::to_string(groups.size()) + " subject pairs for " +
                                std::to_string(k) + " folds");
        }
        std::vector<const std::vector<std::size_t>*> order;
        for (const auto& [pair, idx] : groups) order.push_back(&idx);
        std::shuffle(order.begin(), order.end(), rng);
        std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->size() > b->size(); });
        std::vector<std::size_t> load(k, 0);
        for (const auto* idx : order) {
            const auto fold = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
            for (std::size_t i : *idx) split.fold_of[i] = fold;
            load[fold] += idx->size();
        }
        return split;
    }

    std::map<std::size_t, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < seqs.size(); ++i) by_label[seqs[i].label].push_back(i);
    std::size_t next = 0;
    for (auto& [label, idx] : by_label) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i : idx) split.fold_of[i] = next++ % k;
    }
    return split;
}

Dataset select(std::span<const SkeletonSequence> seqs, std::span<const std::size_t> indices) {
    Dataset out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(seqs[i]);
    return out;
}

}  // namespace sta
