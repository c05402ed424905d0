#include "idcanvas/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>

#include "idcanvas/errors.hpp"

namespace idcanvas {

namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ConfigError(path + ": truncated archive");
    return v;
}

}  // namespace

void save_archive(const std::string& path, const NamedTensors& entries) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write("IDCK", 4);
        put<std::uint32_t>(out, kVersion);
        put<std::uint64_t>(out, entries.size());
        for (const auto& [name, t] : entries) {
            put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
            for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
            out.write(reinterpret_cast<const char*>(t.data().data()),
                      static_cast<std::streamsize>(t.size() * sizeof(double)));
        }
        if (!out) throw std::runtime_error("write failed for " + tmp);
    }
    std::rename(tmp.c_str(), path.c_str());
}

NamedTensors load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "IDCK") throw ConfigError(path + ": not a checkpoint archive");
    if (get<std::uint32_t>(in, path) != kVersion) throw ConfigError(path + ": unsupported version");
    NamedTensors entries(get<std::uint64_t>(in, path));
    for (auto& [name, t] : entries) {
        name.resize(get<std::uint32_t>(in, path));
        in.read(name.data(), static_cast<std::streamsize>(name.size()));
        Shape shape(get<std::uint32_t>(in, path));
        for (auto& d : shape) d = get<std::uint64_t>(in, path);
        t = Tensor(shape);
        in.read(reinterpret_cast<char*>(t.data().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw ConfigError(path + ": truncated archive");
    }
    return entries;
}

void save_checkpoint(const std::string& path, const ParameterStore& store, const AdamW* optimizer,
                     long step) {
    NamedTensors entries;
    for (const auto& p : store.all()) entries.emplace_back(p.name, p.value());
    if (optimizer) {
        const AdamW& opt = *optimizer;
        std::size_t k = 0;
        for (const auto& p : store.all()) {
            entries.emplace_back("adamw.m/" + p.name, opt.first_moments()[k]);
            entries.emplace_back("adamw.v/" + p.name, opt.second_moments()[k]);
            ++k;
        }
        entries.emplace_back("adamw.t", Tensor({1}, static_cast<double>(opt.steps_taken())));
    }
    entries.emplace_back("train.step", Tensor({1}, static_cast<double>(step)));
    save_archive(path, entries);
}

long load_checkpoint(const std::string& path, ParameterStore& store, AdamW* optimizer) {
    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : load_archive(path)) by_name.emplace(name, std::move(t));
    auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ConfigError(path + ": missing tensor '" + name + "'");
        if (it->second.shape() != shape)
            throw ConfigError(path + ": tensor '" + name + "' has shape " +
                              shape_str(it->second.shape()) + ", model expects " + shape_str(shape));
        return it->second;
    };
    for (auto& p : store.all()) p.value() = fetch(p.name, p.value().shape());
    if (optimizer) {
        std::size_t k = 0;
        for (const auto& p : store.all()) {
            optimizer->first_moments()[k] = fetch("adamw.m/" + p.name, p.value().shape());
            optimizer->second_moments()[k] = fetch("adamw.v/" + p.name, p.value().shape());
            ++k;
        }
        optimizer->set_steps_taken(static_cast<long>(fetch("adamw.t", {1})[0]));
    }
    return static_cast<long>(fetch("train.step", {1})[0]);
}

}  // namespace idcanvas
