#include "planoforge/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace planoforge {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagInt8 = 1u;

std::uint32_t crc32(const std::string& bytes) {
    static std::uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int j = 0; j < 8; ++j) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        ready = true;
    }
    std::uint32_t c = 0xFFFFFFFFu;
    for (unsigned char ch : bytes) c = table[(c ^ ch) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw IoError("checkpoint: truncated file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

void put_string(std::string& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

std::string take_string(const std::string& in, std::size_t& pos) {
    const auto len = take<std::uint32_t>(in, pos);
    if (pos + len > in.size()) throw IoError("checkpoint: truncated string");
    std::string s = in.substr(pos, len);
    pos += len;
    return s;
}

double quant_scale(const Tensor& t) {
    double max_abs = 0.0;
    for (double v : t.data) max_abs = std::max(max_abs, std::abs(v));
    return max_abs == 0.0 ? 1.0 : max_abs / 127.0;
}

}  // namespace

void save_checkpoint(const DenoiserModel& model, const std::string& path, bool int8) {
    std::string out;
    out.append(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, int8 ? kFlagInt8 : 0u);
    put_string(out, model.config().to_json().dump());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
    for (const auto& [name, t] : model.parameters()) {
        put_string(out, name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
        if (int8) {
            const double scale = quant_scale(t);
            put<float>(out, static_cast<float>(scale));
            for (double v : t.data) {
                const double q = std::min(127.0, std::max(-127.0, std::round(v / scale)));
                put<std::int8_t>(out, static_cast<std::int8_t>(q));
            }
        } else {
            for (double v : t.data) put<float>(out, static_cast<float>(v));
        }
    }
    put<std::uint32_t>(out, crc32(out));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

DenoiserModel load_checkpoint(const std::string& path, CheckpointInfo* info) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open " + path);
    std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (in.size() < 16 || std::memcmp(in.data(), kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    const std::string body = in.substr(0, in.size() - 4);
    std::size_t tail = in.size() - 4;
    if (take<std::uint32_t>(in, tail) != crc32(body))
        throw IoError("checkpoint: checksum mismatch in " + path);

    std::size_t pos = 4;
    const auto version = take<std::uint32_t>(in, pos);
    if (version != kVersion) throw IoError("checkpoint: unsupported version");
    const auto flags = take<std::uint32_t>(in, pos);
    const bool int8 = (flags & kFlagInt8) != 0;
    const DenoiserConfig cfg = DenoiserConfig::from_json(nlohmann::json::parse(take_string(in, pos)));
    const auto count = take<std::uint32_t>(in, pos);

    std::map<std::string, Tensor> params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = take_string(in, pos);
        const auto rank = take<std::uint32_t>(in, pos);
        Shape shape(rank);
        for (auto& d : shape) d = take<std::uint64_t>(in, pos);
        Tensor t = Tensor::zeros(shape);
        if (int8) {
            const double scale = take<float>(in, pos);
            for (double& v : t.data) v = static_cast<double>(take<std::int8_t>(in, pos)) * scale;
        } else {
            for (double& v : t.data) v = take<float>(in, pos);
        }
        params.emplace(name, std::move(t));
    }
    if (info) {
        info->version = version;
        info->quantized = int8;
        info->arch = cfg;
        info->file_bytes = in.size();
    }
    return DenoiserModel(cfg, std::move(params));
}

nlohmann::json QuantizationReport::to_json() const {
    return {{"full_bytes", full_bytes},
            {"quant_bytes", quant_bytes},
            {"size_ratio", size_ratio},
            {"max_abs_error", max_abs_error}};
}

QuantizationReport quantize_checkpoint(const DenoiserModel& model, const std::string& fp32_path,
                                       const std::string& int8_path) {
    save_checkpoint(model, fp32_path, false);
    save_checkpoint(model, int8_path, true);
    QuantizationReport r;
    r.full_bytes = std::filesystem::file_size(fp32_path);
    r.quant_bytes = std::filesystem::file_size(int8_path);
    r.size_ratio = static_cast<double>(r.quant_bytes) / static_cast<double>(r.full_bytes);
    for (const auto& [name, t] : model.parameters()) {
        const double scale = quant_scale(t);
        for (double v : t.data) {
            const double q = std::min(127.0, std::max(-127.0, std::round(v / scale)));
            r.max_abs_error = std::max(r.max_abs_error, std::abs(v - q * scale));
        }
    }
    return r;
}

}  // namespace planoforge
