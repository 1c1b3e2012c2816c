#include "arfp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "arfp/errors.hpp"

namespace arfp {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'F', 'P', 'C', 'K', 'P', 'T'};

class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::vector<char> buf;
};

class Reader {
public:
    Reader(const std::vector<char>& b, std::string p) : buf(b), path(std::move(p)) {}
    void raw(void* out, std::size_t n) {
        if (pos + n > buf.size()) throw IoError("truncated checkpoint", path);
        std::memcpy(out, buf.data() + pos, n);
        pos += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (pos + n > buf.size()) throw IoError("truncated checkpoint", path);
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }
    const std::vector<char>& buf;
    std::string path;
    std::size_t pos = 0;
};

std::vector<char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file", path);
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind, const nlohmann::json& arch,
                     const std::vector<std::pair<std::string, const ParamSet*>>& groups) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.str(kind);
    w.str(arch.dump());
    w.u32(static_cast<std::uint32_t>(groups.size()));
    for (const auto& [gname, ps] : groups) {
        w.str(gname);
        w.u32(static_cast<std::uint32_t>(ps->size()));
        for (std::size_t i = 0; i < ps->size(); ++i) {
            const Tensor& t = ps->var(i).value();
            w.str(ps->name(i));
            w.u32(static_cast<std::uint32_t>(t.rank()));
            for (int d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
            w.raw(t.data(), t.size() * sizeof(double));
        }
    }
    const std::uint64_t h = fnv1a(w.buf.data(), w.buf.size());
    w.raw(&h, sizeof h);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint", path);
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw IoError("failed writing checkpoint", path);
}

Checkpoint read_checkpoint(const std::string& path) {
    const std::vector<char> buf = read_all(path);
    if (buf.size() < sizeof kMagic + 12 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
        throw IoError("not a checkpoint file", path);
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - sizeof stored, sizeof stored);
    if (fnv1a(buf.data(), buf.size() - sizeof stored) != stored) throw IoError("checkpoint checksum mismatch", path);
    Reader r(buf, path);
    char magic[8];
    r.raw(magic, sizeof magic);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version), path);
    Checkpoint ck;
    ck.kind = r.str();
    ck.arch = nlohmann::json::parse(r.str());
    const std::uint32_t ng = r.u32();
    for (std::uint32_t g = 0; g < ng; ++g) {
        const std::string gname = r.str();
        const std::uint32_t np = r.u32();
        auto& entries = ck.groups[gname];
        for (std::uint32_t p = 0; p < np; ++p) {
            const std::string pname = r.str();
            const std::uint32_t rank = r.u32();
            Shape shape;
            for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
            Tensor t(shape);
            r.raw(t.data(), t.size() * sizeof(double));
            entries.emplace_back(pname, std::move(t));
        }
    }
    return ck;
}

void restore_group(const Checkpoint& ckpt, const std::string& group, ParamSet& params) {
    auto it = ckpt.groups.find(group);
    if (it == ckpt.groups.end()) throw std::invalid_argument("checkpoint has no group '" + group + "'");
    const auto& entries = it->second;
    if (entries.size() != params.size())
        throw std::invalid_argument("checkpoint group '" + group + "' has " + std::to_string(entries.size()) +
                                    " parameters, model expects " + std::to_string(params.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].first != params.name(i) || entries[i].second.shape() != params.var(i).shape())
            throw std::invalid_argument("checkpoint parameter mismatch at '" + params.name(i) + "'");
        params.var(i).mutable_value() = entries[i].second;
    }
}

std::uint64_t file_hash(const std::string& path) {
    const std::vector<char> buf = read_all(path);
    return fnv1a(buf.data(), buf.size());
}

}  // namespace arfp
