#include "gridface/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "gridface/config.hpp"

namespace gridface {

namespace {

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw IoError("checkpoint: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void Checkpoint::put_store(const ParameterStore& store) {
    for (const auto& [name, t] : store.items()) {
        tensors[name] = Tensor::create(t->shape, t->data, false);
    }
}

int Checkpoint::fill_store(const std::string& prefix, ParameterStore& store) const {
    int count = 0;
    for (const auto& [name, t] : tensors) {
        if (name.rfind(prefix, 0) != 0) continue;
        TensorPtr dst = store.get(name);
        GF_REQUIRE(dst->shape == t->shape, "checkpoint: shape mismatch for tensor " + name);
        dst->data = t->data;
        ++count;
    }
    return count;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::string out;
    out += "GFCK";
    put_u32(out, Checkpoint::kVersion);
    put_u64(out, fnv1a64(ck.config_text));
    put_u32(out, static_cast<uint32_t>(ck.config_text.size()));
    out += ck.config_text;
    put_u64(out, ck.rng_state);
    put_u64(out, ck.epoch);
    put_f64(out, ck.lr);
    put_f64(out, ck.best_val);
    put_u32(out, ck.plateau);
    put_u64(out, ck.tensors.size());
    for (const auto& [name, t] : ck.tensors) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<uint32_t>(t->shape.size()));
        for (int e : t->shape) put_u64(out, static_cast<uint64_t>(e));
        for (double v : t->data) put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf};
    if (r.str(4) != "GFCK") throw IoError("checkpoint: bad magic in " + path);
    uint32_t version = r.u32();
    if (version != Checkpoint::kVersion) {
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint ck;
    uint64_t digest = r.u64();
    ck.config_text = r.str(r.u32());
    if (digest != fnv1a64(ck.config_text)) {
        throw IoError("checkpoint: config digest mismatch in " + path);
    }
    ck.rng_state = r.u64();
    ck.epoch = r.u64();
    ck.lr = r.f64();
    ck.best_val = r.f64();
    ck.plateau = r.u32();
    uint64_t count = r.u64();
    for (uint64_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u32());
        uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(r.u64());
            numel *= shape[d];
        }
        std::vector<double> data(numel);
        for (int64_t d = 0; d < numel; ++d) data[d] = r.f64();
        ck.tensors[name] = Tensor::create(std::move(shape), std::move(data), false);
    }
    if (r.pos != buf.size()) throw IoError("checkpoint: trailing bytes in " + path);
    return ck;
}

}  // namespace gridface
