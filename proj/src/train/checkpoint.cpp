#include "mcvae/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mcvae::train {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'V', 'A', 'E', 'C', 'K', 'P'};

class Writer {
public:
    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string &s)
    {
        u32(std::uint32_t(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
    void doubles(const std::vector<double> &v)
    {
        for (double d : v) f64(d);
    }

    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t> &b) : bytes(b) {}

    const std::uint8_t *take(std::size_t n)
    {
        if (bytes.size() - pos < n)
            throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos));
        const auto *p = bytes.data() + pos;
        pos += n;
        return p;
    }
    std::uint8_t u8() { return *take(1); }
    std::uint32_t u32()
    {
        const auto *p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        const auto *p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str()
    {
        const std::uint32_t n = u32();
        const auto *p = take(n);
        return std::string(reinterpret_cast<const char *>(p), n);
    }
    std::vector<double> doubles(std::size_t n)
    {
        if ((bytes.size() - pos) / 8 < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos));
        std::vector<double> v(n);
        for (auto &d : v) d = f64();
        return v;
    }

    const std::vector<std::uint8_t> &bytes;
    std::size_t pos = 0;
};

} // namespace

std::vector<std::uint8_t> encode(const Checkpoint &c)
{
    Writer w;
    w.out.insert(w.out.end(), std::begin(kMagic), std::end(kMagic));
    w.u32(Checkpoint::kFormatVersion);
    w.str(c.config_text);
    w.u64(c.epoch);
    w.u64(c.rng.key);
    w.u64(c.rng.counter);
    w.f64(c.best_metric);
    w.u64(std::uint64_t(c.best_epoch));
    w.u32(std::uint32_t(c.frozen.size()));
    for (const auto &f : c.frozen) w.str(f);
    w.u32(std::uint32_t(c.tensors.size()));
    for (const auto &[name, t] : c.tensors) {
        w.str(name);
        w.u32(std::uint32_t(t.shape.size()));
        for (auto e : t.shape) w.u64(e);
        if (t.values.size() != ad::numel(t.shape)) throw CheckpointError("checkpoint: tensor " + name + " size mismatch");
        w.doubles(t.values);
        w.u64(t.slot.steps);
        const bool moments = !t.slot.m.empty();
        if (moments && (t.slot.m.size() != t.values.size() || t.slot.v.size() != t.values.size()))
            throw CheckpointError("checkpoint: optimizer slot of " + name + " does not match its tensor");
        w.u8(moments ? 1 : 0);
        if (moments) {
            w.doubles(t.slot.m);
            w.doubles(t.slot.v);
        }
    }
    return std::move(w.out);
}

Checkpoint decode(const std::vector<std::uint8_t> &bytes)
{
    Reader r(bytes);
    if (std::memcmp(r.take(8), kMagic, 8) != 0) throw CheckpointError("not a checkpoint file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::kFormatVersion)
        throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(Checkpoint::kFormatVersion) + ")");
    Checkpoint c;
    c.config_text = r.str();
    c.epoch = r.u64();
    c.rng.key = r.u64();
    c.rng.counter = r.u64();
    c.best_metric = r.f64();
    c.best_epoch = std::int64_t(r.u64());
    for (std::uint32_t n = r.u32(); n > 0; --n) c.frozen.insert(r.str());
    for (std::uint32_t n = r.u32(); n > 0; --n) {
        std::string name = r.str();
        TensorRecord t;
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw CheckpointError("checkpoint: tensor " + name + " has implausible rank");
        for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(r.u64());
        const std::size_t count = ad::numel(t.shape);
        t.values = r.doubles(count);
        t.slot.steps = r.u64();
        if (r.u8()) {
            t.slot.m = r.doubles(count);
            t.slot.v = r.doubles(count);
        }
        if (!c.tensors.emplace(std::move(name), std::move(t)).second)
            throw CheckpointError("checkpoint: duplicate tensor record");
    }
    if (r.pos != bytes.size()) throw CheckpointError("checkpoint: trailing bytes after the last record");
    try {
        (void)c.config();
    } catch (const ConfigError &e) {
        throw CheckpointError(std::string("checkpoint: embedded ") + e.what());
    }
    return c;
}

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path)
{
    const auto bytes = encode(ckpt);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out.write(reinterpret_cast<const char *>(bytes.data()), std::streamsize(bytes.size()));
        if (!out) throw CheckpointError("write failed for checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode(bytes);
    } catch (const CheckpointError &e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

} // namespace mcvae::train
