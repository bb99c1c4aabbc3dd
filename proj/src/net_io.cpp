// Model file I/O. Layout:
//   bytes 0..3   magic "HINF"
//   u32 LE       format version
//   u64 LE       header length
//   header       JSON: {"config": ..., "weight_count": N, "fingerprint": ...}
//   f64 LE * N   flat weight block
//   u32 LE       CRC32 over everything preceding it

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "hinf/net.hpp"

namespace hinf {

namespace {

constexpr char kMagic[4] = {'H', 'I', 'N', 'F'};

std::uint32_t crc_table_entry(std::uint32_t i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    return c;
}

const std::uint32_t* crc_table() {
    static std::uint32_t table[256];
    static bool init = [] {
        for (std::uint32_t i = 0; i < 256; ++i) table[i] = crc_table_entry(i);
        return true;
    }();
    (void)init;
    return table;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::string& s, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    return v;
}

nlohmann::json config_to_json(const NetConfig& c) {
    nlohmann::json j;
    j["input_dim"] = c.input_dim;
    j["hidden"] = c.hidden;
    j["dtheta"] = c.dtheta;
    j["bound"] = std::isfinite(c.bound) ? nlohmann::json(c.bound) : nlohmann::json();
    j["seed"] = c.seed;
    nlohmann::json hp = nlohmann::json::object();
    for (const auto& [k, subset] : c.head_partition) hp[std::to_string(k)] = subset;
    j["head_partition"] = hp;
    j["positive_params"] = c.positive_params;
    return j;
}

NetConfig config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.dtheta = j.at("dtheta").get<std::size_t>();
    c.bound = j.at("bound").is_null() ? std::numeric_limits<double>::infinity()
                                      : j.at("bound").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [key, subset] : j.at("head_partition").items())
        c.head_partition[std::stoul(key)] = subset.get<std::vector<std::size_t>>();
    c.positive_params = j.at("positive_params").get<std::vector<std::size_t>>();
    return c;
}

}  // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed) {
    const std::uint32_t* table = crc_table();
    std::uint32_t c = seed ^ 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

void save_net(const StructuredNet& net, const std::string& path,
              const std::string& fingerprint_json) {
    nlohmann::json header;
    header["config"] = config_to_json(net.config());
    const std::vector<double> w = net.flat_params();
    header["weight_count"] = w.size();
    header["fingerprint"] = nlohmann::json::parse(fingerprint_json);
    const std::string hdr = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kModelFormatVersion);
    put_u64(out, hdr.size());
    out.append(hdr);
    for (double v : w) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(out, bits);
    }
    put_u32(out, crc32(reinterpret_cast<const unsigned char*>(out.data()), out.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), errc::data, "FileIO", "cannot open model file for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    require(f.good(), errc::data, "FileIO", "short write to model file: " + path);
}

StructuredNet load_net(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), errc::data, "FileIO", "cannot open model file: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    require(buf.size() >= 20, errc::data, "CorruptFile", "model file truncated: " + path);
    require(std::memcmp(buf.data(), kMagic, 4) == 0, errc::data, "CorruptFile",
            "bad magic bytes in model file: " + path);
    const std::uint32_t version = get_u32(buf, 4);
    require(version == kModelFormatVersion, errc::data, "FormatVersionMismatch",
            "model format version " + std::to_string(version) + " unsupported");

    const std::uint32_t stored_crc = get_u32(buf, buf.size() - 4);
    const std::uint32_t actual_crc =
        crc32(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4);
    require(stored_crc == actual_crc, errc::data, "CorruptFile",
            "model file checksum mismatch: " + path);

    const std::uint64_t hdr_len = get_u64(buf, 8);
    require(16 + hdr_len + 4 <= buf.size(), errc::data, "CorruptFile",
            "model header length exceeds file: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(16, hdr_len));
    } catch (const std::exception& e) {
        fail(errc::data, "CorruptFile", std::string("model header unparsable: ") + e.what());
    }

    NetConfig cfg = config_from_json(header.at("config"));
    StructuredNet net(cfg);
    const std::size_t count = header.at("weight_count").get<std::size_t>();
    require(count == net.param_count(), errc::data, "CorruptFile",
            "weight count disagrees with config");
    require(buf.size() == 16 + hdr_len + 8 * count + 4, errc::data, "CorruptFile",
            "model file size disagrees with header");

    std::vector<double> w(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t bits = get_u64(buf, 16 + hdr_len + 8 * i);
        std::memcpy(&w[i], &bits, 8);
    }
    net.set_flat_params(w);
    return net;
}

}  // namespace hinf
