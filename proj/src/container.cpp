// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bttf/error.hpp"

namespace bttf::num {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint64_t to_le(std::uint64_t x) {
    if constexpr (std::endian::native == std::endian::little) return x;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((x >> (8 * i)) & 0xff) << (8 * (7 - i));
    return r;
}

void put_u64(std::ostream& out, std::uint64_t x) {
    x = to_le(x);
    out.write(reinterpret_cast<const char*>(&x), sizeof x);
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t x = 0;
    in.read(reinterpret_cast<char*>(&x), sizeof x);
    return to_le(x);
}

}  // namespace

const Tensor& Container::at(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.tensor;
    }
    throw DataError("container has no tensor named '" + name + "'");
}

void write_container(const std::filesystem::path& path, const std::string& format, nlohmann::json header,
                     const std::vector<NamedTensor>& tensors) {
    header["format"] = format;
    auto index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        index.push_back({{"name", t.name}, {"shape", t.tensor.shape()}, {"dtype", "f64"}, {"offset", offset}});
        offset += t.tensor.size();
    }
    header["tensors"] = std::move(index);
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : tensors) {
        for (double v : t.tensor.values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            put_u64(out, bits);
        }
    }
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path, const std::string& format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    const std::uint64_t len = get_u64(in);
    if (!in || len > (std::uint64_t{1} << 32)) throw DataError("'" + path.string() + "' is not a tensor container");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("'" + path.string() + "': truncated header");

    Container c;
    try {
        c.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path.string() + "': bad header: " + e.what());
    }
    if (c.header.value("format", "") != format) {
        throw DataError("'" + path.string() + "': expected format " + format + ", found " +
                        c.header.value("format", "<none>"));
    }
    for (const auto& entry : c.header.at("tensors")) {
        if (entry.value("dtype", "") != "f64") throw DataError("unsupported dtype in '" + path.string() + "'");
        Shape shape = entry.at("shape").get<Shape>();
        std::vector<double> data(shape_size(shape));
        for (double& v : data) {
            const std::uint64_t bits = get_u64(in);
            std::memcpy(&v, &bits, sizeof v);
        }
        if (!in) throw DataError("'" + path.string() + "': truncated tensor data");
        c.tensors.push_back({entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data))});
    }
    return c;
}

}  // namespace bttf::num
