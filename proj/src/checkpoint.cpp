#include "sta/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <map>

#include "json.hpp"
#include "sta/errors.hpp"
#include "sta/io.hpp"

namespace sta {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "sta-checkpoint";

void put_le(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>(bits & 0xff));
        bits >>= 8;
    }
}

double get_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
}

json shape_json(const ModelShape& s) {
    return {{"joints", s.joints},
            {"persons", s.persons},
            {"classes", s.classes},
            {"main_hidden", s.main_hidden},
            {"main_layers", s.main_layers},
            {"spatial_hidden", s.spatial_hidden},
            {"score_hidden", s.score_hidden},
            {"temporal_hidden", s.temporal_hidden}};
}

ModelShape shape_from_json(const json& j) {
    ModelShape s;
    s.joints = j.at("joints").get<std::size_t>();
    s.persons = j.at("persons").get<std::size_t>();
    s.classes = j.at("classes").get<std::size_t>();
    s.main_hidden = j.at("main_hidden").get<std::size_t>();
    s.main_layers = j.at("main_layers").get<std::size_t>();
    s.spatial_hidden = j.at("spatial_hidden").get<std::size_t>();
    s.score_hidden = j.at("score_hidden").get<std::size_t>();
    s.temporal_hidden = j.at("temporal_hidden").get<std::size_t>();
    return s;
}

json tensor_entry(const std::string& name, const std::string& group, const Tensor& t, std::size_t offset) {
    return {{"name", name}, {"group", group}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}};
}

}  // namespace

fs::path blob_path(const fs::path& manifest) {
    fs::path p = manifest;
    p += ".bin";
    return p;
}

void checkpoint_save(const STAModel& model, const AdamState* adam, const fs::path& manifest,
                     const std::string& meta_json) {
    model.validate();
    json meta = json::parse(meta_json);
    if (!meta.is_object()) throw ContractError("checkpoint meta must be a JSON object");

    std::string blob;
    json tensors = json::array();
    json adam_tensors = json::array();
    const auto params = model.parameters();
    for (const auto& p : params) {
        tensors.push_back(tensor_entry(p.name, group_name(p.group), *p.tensor, blob.size()));
        for (double v : p.tensor->values()) put_le(blob, v);
    }
    if (adam) {
        if (adam->m.size() != params.size()) throw ContractError("adam state does not match the model");
        for (std::size_t i = 0; i < params.size(); ++i) {
            adam_tensors.push_back(tensor_entry("m." + params[i].name, group_name(params[i].group), adam->m[i], blob.size()));
            for (double v : adam->m[i].values()) put_le(blob, v);
            adam_tensors.push_back(tensor_entry("v." + params[i].name, group_name(params[i].group), adam->v[i], blob.size()));
            for (double v : adam->v[i].values()) put_le(blob, v);
        }
    }

    const auto digest =
        fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(blob.data()), blob.size()));
    json m = {{"format", kFormat},
              {"version", kCheckpointVersion},
              {"blob", blob_path(manifest).filename().string()},
              {"blob_bytes", blob.size()},
              {"blob_fnv1a64", hex64(digest)},
              {"model", shape_json(model.shape)},
              {"spatial_bypass", model.spatial_bypass},
              {"temporal_bypass", model.temporal_bypass},
              {"tensors", tensors},
              {"meta", meta}};
    if (adam) {
        m["adam"] = {{"step_count", adam->step_count},
                     {"lr", adam->cfg.lr},
                     {"beta1", adam->cfg.beta1},
                     {"beta2", adam->cfg.beta2},
                     {"eps", adam->cfg.eps},
                     {"tensors", adam_tensors}};
    }
    write_file_atomic(blob_path(manifest), blob);
    write_file_atomic(manifest, m.dump(2) + "\n");
}

Checkpoint checkpoint_load(const fs::path& manifest) {
    json m;
    try {
        m = json::parse(read_file(manifest));
    } catch (const json::exception& e) {
        throw LoadError(manifest.string() + ": unreadable manifest: " + e.what());
    } catch (const Error& e) {
        throw LoadError(e.what());
    }
    try {
        if (m.value("format", std::string{}) != kFormat) throw LoadError(manifest.string() + ": not a checkpoint");
        const int version = m.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw VersionError(manifest.string() + ": unknown manifest version " + std::to_string(version));
        }
        const fs::path blob_file = manifest.parent_path() / m.at("blob").get<std::string>();
        std::string blob;
        try {
            blob = read_file(blob_file);
        } catch (const Error&) {
            throw CorruptionError("missing checkpoint blob " + blob_file.string());
        }
        const auto expected_bytes = m.at("blob_bytes").get<std::size_t>();
        if (blob.size() != expected_bytes) {
            throw CorruptionError(blob_file.string() + ": " + std::to_string(blob.size()) + " bytes, manifest says " +
                                  std::to_string(expected_bytes));
        }
        const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
        const auto digest = hex64(fnv1a64(std::span<const unsigned char>(bytes, blob.size())));
        if (digest != m.at("blob_fnv1a64").get<std::string>()) {
            throw CorruptionError(blob_file.string() + ": digest mismatch");
        }

        auto fill = [&](Tensor& t, const json& entry) {
            const auto shape = entry.at("shape").get<Shape>();
            const auto offset = entry.at("offset").get<std::size_t>();
            const auto count = entry.at("count").get<std::size_t>();
            if (shape != t.shape() || count != t.size()) {
                throw LoadError("tensor " + entry.at("name").get<std::string>() + " has shape " + shape_string(shape) +
                                ", model expects " + shape_string(t.shape()));
            }
            if (offset % 8 != 0 || offset + count * 8 > blob.size()) {
                throw CorruptionError("tensor " + entry.at("name").get<std::string>() + " lies outside the blob");
            }
            for (std::size_t i = 0; i < count; ++i) t[i] = get_le(bytes + offset + i * 8);
        };

        Checkpoint cp;
        cp.model = STAModel::zeros(shape_from_json(m.at("model")));
        cp.model.spatial_bypass = m.at("spatial_bypass").get<bool>();
        cp.model.temporal_bypass = m.at("temporal_bypass").get<bool>();
        auto params = cp.model.parameters();
        const auto& entries = m.at("tensors");
        if (entries.size() != params.size()) {
            throw LoadError("manifest lists " + std::to_string(entries.size()) + " tensors, model has " +
                            std::to_string(params.size()));
        }
        std::map<std::string, const json*> by_name;
        for (const auto& e : entries) by_name[e.at("name").get<std::string>()] = &e;
        for (auto& p : params) {
            const auto it = by_name.find(p.name);
            if (it == by_name.end()) throw LoadError("manifest lacks tensor " + p.name);
            fill(*p.tensor, *it->second);
        }
        if (m.contains("adam")) {
            const auto& a = m.at("adam");
            AdamConfig cfg{a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                           a.at("eps").get<double>()};
            AdamState st = AdamState::for_model(cp.model, cfg);
            st.step_count = a.at("step_count").get<std::size_t>();
            std::map<std::string, const json*> adam_by_name;
            for (const auto& e : a.at("tensors")) adam_by_name[e.at("name").get<std::string>()] = &e;
            for (std::size_t i = 0; i < params.size(); ++i) {
                const auto mi = adam_by_name.find("m." + params[i].name);
                const auto vi = adam_by_name.find("v." + params[i].name);
                if (mi == adam_by_name.end() || vi == adam_by_name.end()) {
                    throw LoadError("adam state lacks moments of " + params[i].name);
                }
                fill(st.m[i], *mi->second);
                fill(st.v[i], *vi->second);
            }
            cp.adam = std::move(st);
        }
        cp.meta_json = m.value("meta", json::object()).dump();
        cp.model.validate();
        return cp;
    } catch (const json::exception& e) {
        throw LoadError(manifest.string() + ": malformed manifest: " + e.what());
    } catch (const DimensionError& e) {
        throw LoadError(manifest.string() + ": " + e.what());
    } catch (const ContractError& e) {
        throw LoadError(manifest.string() + ": " + e.what());
    }
}

}  // namespace sta
