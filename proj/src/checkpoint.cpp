#include "fashrank/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "fashrank/errors.hpp"

namespace fashrank {

namespace {

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void block(const double* data, Eigen::Index n) {
        for (Eigen::Index k = 0; k < n; ++k) f64(data[k]);
    }

private:
    void le(std::uint64_t v, int bytes) {
        std::array<char, 8> buf{};
        for (int b = 0; b < bytes; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xff);
        out_.write(buf.data(), bytes);
    }

    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::string str() {
        const auto n = u32();
        std::string s(n, '\0');
        in_.read(s.data(), n);
        check();
        return s;
    }
    void block(double* data, Eigen::Index n) {
        for (Eigen::Index k = 0; k < n; ++k) data[k] = f64();
    }
    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        check();
    }

private:
    std::uint64_t le(int bytes) {
        std::array<unsigned char, 8> buf{};
        in_.read(reinterpret_cast<char*>(buf.data()), bytes);
        check();
        std::uint64_t v = 0;
        for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
        return v;
    }
    void check() {
        if (!in_) throw Error(ErrorCode::Parse, "checkpoint truncated");
    }

    std::istream& in_;
};

// Guards against absurd sizes from a corrupt header before allocating.
constexpr std::uint64_t kMaxDim = 1u << 20;

}  // namespace

void write_checkpoint(const ModelParams& params, std::ostream& out) {
    params.validate();
    Writer w(out);
    out.write(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.mode));
    const std::size_t n_epochs = params.temporal ? params.temporal->schedule.epoch_count() : 1;
    w.u64(params.K);
    w.u64(params.K_vis);
    w.u64(params.F);
    w.u64(n_epochs);
    w.u64(params.user_count());
    for (const auto& id : params.users.names()) w.str(id);
    w.u64(params.item_count());
    for (const auto& id : params.items.names()) w.str(id);
    w.f64(params.alpha);
    w.block(params.user_bias.data(), params.user_bias.size());
    w.block(params.item_bias.data(), params.item_bias.size());
    w.block(params.visual_bias.data(), params.visual_bias.size());
    w.block(params.user_latent.data(), params.user_latent.size());
    w.block(params.item_latent.data(), params.item_latent.size());
    w.block(params.user_visual.data(), params.user_visual.size());
    w.block(params.embedding.data(), params.embedding.size());
    if (params.temporal) {
        const auto& t = *params.temporal;
        w.i64(t.schedule.time_min);
        w.i64(t.schedule.time_max);
        for (auto b : t.schedule.boundaries) w.i64(b);
        w.block(t.weights.data(), t.weights.size());
        for (const auto& d : t.drifts) w.block(d.data(), d.size());
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint");
}

ModelParams read_checkpoint(std::istream& in) {
    Reader r(in);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw Error(ErrorCode::Parse, "not a FRNK checkpoint");
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::Parse, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto mode_raw = r.u32();
    if (mode_raw > static_cast<std::uint32_t>(ModelMode::Temporal)) {
        throw Error(ErrorCode::Parse, "bad mode tag in checkpoint");
    }
    const auto mode = static_cast<ModelMode>(mode_raw);
    const auto K = r.u64();
    const auto K_vis = r.u64();
    const auto F = r.u64();
    const auto N = r.u64();
    if (K > kMaxDim || K_vis > kMaxDim || F > kMaxDim || N == 0 || N > kMaxDim) {
        throw Error(ErrorCode::Parse, "implausible checkpoint dimensions");
    }
    std::vector<std::string> users(r.u64());
    for (auto& id : users) id = r.str();
    std::vector<std::string> items(r.u64());
    for (auto& id : items) id = r.str();

    auto p = ModelParams::zeros(mode, IdTable(std::move(users)), IdTable(std::move(items)), K, K_vis, F, N);
    p.alpha = r.f64();
    r.block(p.user_bias.data(), p.user_bias.size());
    r.block(p.item_bias.data(), p.item_bias.size());
    r.block(p.visual_bias.data(), p.visual_bias.size());
    r.block(p.user_latent.data(), p.user_latent.size());
    r.block(p.item_latent.data(), p.item_latent.size());
    r.block(p.user_visual.data(), p.user_visual.size());
    r.block(p.embedding.data(), p.embedding.size());
    if (p.temporal) {
        auto& t = *p.temporal;
        t.schedule.time_min = r.i64();
        t.schedule.time_max = r.i64();
        for (auto& b : t.schedule.boundaries) b = r.i64();
        r.block(t.weights.data(), t.weights.size());
        for (auto& d : t.drifts) r.block(d.data(), d.size());
    }
    p.validate();
    return p;
}

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".json";
    return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path, const nlohmann::json& manifest) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
        write_checkpoint(params, out);
    }
    nlohmann::json m = manifest;
    m["format"] = "FRNK";
    m["version"] = kCheckpointVersion;
    m["mode"] = mode_name(params.mode);
    m["dims"] = {{"K", params.K},
                 {"K_vis", params.K_vis},
                 {"F", params.F},
                 {"N", params.temporal ? params.temporal->schedule.epoch_count() : 1},
                 {"users", params.user_count()},
                 {"items", params.item_count()}};
    std::ofstream side(manifest_path(path));
    if (!side) throw Error(ErrorCode::Io, "cannot write manifest for " + path.string());
    side << m.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

nlohmann::json load_manifest(const std::filesystem::path& checkpoint) {
    std::ifstream in(manifest_path(checkpoint));
    if (!in) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "bad checkpoint manifest: " + std::string(e.what()));
    }
}

}  // namespace fashrank
