#include "hazeprior/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hazeprior/error.hpp"

namespace hazeprior {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'H', 'Z', 'P', 'R', 'C', 'K', 'P', 'T'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    std::uint64_t uint(int width)
    {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::string text(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) throw DataError("checkpoint is truncated");
    }

    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt)
{
    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.architecture.size()));
    out.insert(out.end(), ckpt.architecture.begin(), ckpt.architecture.end());
    put_u64(out, ckpt.parameters.size());
    for (double p : ckpt.parameters) put_u64(out, std::bit_cast<std::uint64_t>(p));
    return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes)
{
    Reader in(bytes);
    if (in.text(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw DataError("not a checkpoint file (bad magic)");
    }
    const auto version = in.uint(4);
    if (version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const auto desc_len = in.uint(4);
    ckpt.architecture = in.text(desc_len);
    const auto count = in.uint(8);
    if (count > in.remaining() / 8 || in.remaining() != count * 8) {
        throw DataError("checkpoint parameter count does not match its payload");
    }
    ckpt.parameters.resize(count);
    for (auto& p : ckpt.parameters) p = std::bit_cast<double>(in.uint(8));
    return ckpt;
}

void save_checkpoint(const RestorerModel& model, const fs::path& path)
{
    const auto params = model.parameters();
    const auto bytes = encode_checkpoint({model.architecture(), {params.begin(), params.end()}});
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write checkpoint: " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("cannot write checkpoint: " + path.string());
    }
    fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

std::unique_ptr<RestorerModel> load_model(const fs::path& path)
{
    const Checkpoint ckpt = read_checkpoint(path);
    auto model = make_restorer(ckpt.architecture);
    if (model->parameters().size() != ckpt.parameters.size()) {
        throw DataError("checkpoint parameter count does not match architecture '" + ckpt.architecture + "'");
    }
    model->set_parameters(ckpt.parameters);
    return model;
}

}  // namespace hazeprior
