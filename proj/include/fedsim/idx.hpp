#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "fedsim/dataset.hpp"

namespace fedsim {

namespace detail {

class GzFile {
public:
    explicit GzFile(const std::string& path) : f_(gzopen(path.c_str(), "rb")) {
        if (!f_) throw std::invalid_argument("idx: cannot open " + path);
    }
    ~GzFile() {
        if (f_) gzclose(f_);
    }
    GzFile(const GzFile&) = delete;
    GzFile& operator=(const GzFile&) = delete;

    void read_exact(void* dst, std::size_t n, const std::string& path) {
        const int got = gzread(f_, dst, static_cast<unsigned>(n));
        if (got < 0 || static_cast<std::size_t>(got) != n)
            throw std::invalid_argument("idx: truncated or unreadable file " + path);
    }

    std::uint32_t read_u32_be(const std::string& path) {
        unsigned char b[4];
        read_exact(b, 4, path);
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    }

private:
    gzFile f_;
};

}  // namespace detail

/// Loads an IDX image/label file pair (MNIST-style, optionally gzipped).
/// Pixels are scaled to [0,1] and flattened row-major.
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    constexpr std::uint32_t kImagesMagic = 0x00000803;
    constexpr std::uint32_t kLabelsMagic = 0x00000801;

    detail::GzFile img(images_path);
    const std::uint32_t img_magic = img.read_u32_be(images_path);
    if (img_magic != kImagesMagic)
        throw std::invalid_argument("idx: bad image magic in " + images_path);
    const std::uint32_t n_images = img.read_u32_be(images_path);
    const std::uint32_t rows = img.read_u32_be(images_path);
    const std::uint32_t cols = img.read_u32_be(images_path);

    detail::GzFile lab(labels_path);
    const std::uint32_t lab_magic = lab.read_u32_be(labels_path);
    if (lab_magic != kLabelsMagic)
        throw std::invalid_argument("idx: bad label magic in " + labels_path);
    const std::uint32_t n_labels = lab.read_u32_be(labels_path);
    if (n_images != n_labels)
        throw std::invalid_argument("idx: image/label count mismatch (" +
                                    std::to_string(n_images) + " vs " + std::to_string(n_labels) +
                                    ")");

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    LabeledDataset out;
    out.num_features = dim;
    out.features.resize(static_cast<std::size_t>(n_images) * dim);
    out.labels.resize(n_images);

    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        img.read_exact(buf.data(), dim, images_path);
        double* dst = out.features.data() + static_cast<std::size_t>(i) * dim;
        for (std::size_t j = 0; j < dim; ++j) dst[j] = buf[j] / 255.0;
    }
    std::vector<unsigned char> lbuf(n_labels);
    lab.read_exact(lbuf.data(), n_labels, labels_path);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        out.labels[i] = lbuf[i];
        max_label = std::max(max_label, out.labels[i]);
    }
    out.num_classes = static_cast<std::size_t>(max_label) + 1;
    return out;
}

}  // namespace fedsim
