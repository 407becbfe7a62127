#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>

#include "airfl/core_model.hpp"
#include "airfl/error.hpp"

namespace airfl {

namespace {

constexpr std::uint32_t idx_images_magic = 0x00000803;
constexpr std::uint32_t idx_labels_magic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path)
{
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
        fail(ErrorKind::io, "truncated IDX header: " + path);
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    return in;
}

} // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path)
{
    auto img = open_binary(images_path);
    if (read_be32(img, images_path) != idx_images_magic) {
        fail(ErrorKind::io, "bad IDX image magic in " + images_path);
    }
    const auto count = read_be32(img, images_path);
    const auto rows = read_be32(img, images_path);
    const auto cols = read_be32(img, images_path);

    auto lab = open_binary(labels_path);
    if (read_be32(lab, labels_path) != idx_labels_magic) {
        fail(ErrorKind::io, "bad IDX label magic in " + labels_path);
    }
    if (read_be32(lab, labels_path) != count) {
        fail(ErrorKind::io, "IDX image and label counts differ");
    }

    Dataset data;
    data.dim = std::size_t{rows} * cols;
    require(data.dim > 0, ErrorKind::io, "IDX images have zero size");

    std::vector<unsigned char> pixels(static_cast<std::size_t>(count) * data.dim);
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
        fail(ErrorKind::io, "truncated IDX image payload: " + images_path);
    }
    std::vector<unsigned char> labels(count);
    if (!lab.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()))) {
        fail(ErrorKind::io, "truncated IDX label payload: " + labels_path);
    }

    data.inputs.resize(pixels.size());
    std::transform(pixels.begin(), pixels.end(), data.inputs.begin(),
                   [](unsigned char p) { return static_cast<double>(p) / 255.0; });
    data.labels.assign(labels.begin(), labels.end());
    int max_label = 0;
    for (int l : data.labels) max_label = std::max(max_label, l);
    data.num_classes = static_cast<std::size_t>(max_label) + 1;
    return data;
}

} // namespace airfl
