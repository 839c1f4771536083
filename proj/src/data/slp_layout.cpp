#include "mcvae/data/slp_layout.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace mcvae::data {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

std::string format_double(double v)
{
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

double parse_double(const std::string &tok, const fs::path &file, std::size_t line)
{
    double v = 0.0;
    auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || end != tok.data() + tok.size())
        throw DatasetError(file.string() + ":" + std::to_string(line) + ": bad number '" + tok + "'");
    return v;
}

std::string image_name(int pose, Cover cover, const char *modality)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "pose_%03d_%s_%s.f64", pose, std::string(to_string(cover)).c_str(), modality);
    return buf;
}

std::string subject_dir(int subject)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "subject_%03d", subject);
    return buf;
}

} // namespace

void write_image(const fs::path &file, const Image &img)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DatasetError(file.string() + ": cannot open for writing");
    const std::array<std::uint32_t, 4> extents = {1, std::uint32_t(img.channels), std::uint32_t(img.height),
                                                  std::uint32_t(img.width)};
    out.write(reinterpret_cast<const char *>(extents.data()), sizeof extents);
    out.write(reinterpret_cast<const char *>(img.pixels.data()), std::streamsize(img.pixels.size() * sizeof(double)));
    if (!out) throw DatasetError(file.string() + ": write failed");
}

Image read_image(const fs::path &file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DatasetError(file.string() + ": missing image file");
    std::array<std::uint32_t, 4> extents{};
    in.read(reinterpret_cast<char *>(extents.data()), sizeof extents);
    if (!in || extents[0] != 1) throw DatasetError(file.string() + ": bad image header");
    Image img(extents[1], extents[2], extents[3]);
    in.read(reinterpret_cast<char *>(img.pixels.data()), std::streamsize(img.pixels.size() * sizeof(double)));
    if (!in) throw DatasetError(file.string() + ": truncated image data");
    if (in.peek() != std::char_traits<char>::eof()) throw DatasetError(file.string() + ": trailing bytes");
    return img;
}

void export_slp_layout(const fs::path &root, const std::vector<Sample> &samples)
{
    std::map<int, std::vector<const Sample *>> by_subject;
    for (const auto &s : samples) by_subject[s.subject].push_back(&s);
    for (const auto &[subject, list] : by_subject) {
        const auto dir = root / subject_dir(subject);
        fs::create_directories(dir);
        std::ofstream annot(dir / "annot.txt");
        if (!annot) throw DatasetError((dir / "annot.txt").string() + ": cannot open for writing");
        for (const Sample *s : list) {
            write_image(dir / image_name(s->pose, s->cover, "lwir"), s->m1);
            write_image(dir / image_name(s->pose, s->cover, "rgb"), s->m2);
            annot << s->pose << ' ' << to_string(s->cover);
            for (std::size_t j = 0; j < kJointCount; ++j)
                annot << ' ' << format_double(s->joints[j].x) << ' ' << format_double(s->joints[j].y) << ' '
                      << (s->visible[j] ? 1 : 0);
            annot << ' ' << format_double(s->head_size) << '\n';
        }
        if (!annot) throw DatasetError((dir / "annot.txt").string() + ": write failed");
    }
}

std::vector<Sample> load_slp_layout(const fs::path &root)
{
    if (!fs::is_directory(root)) throw DatasetError(root.string() + ": no subjects found");
    std::vector<fs::path> dirs;
    for (const auto &entry : fs::directory_iterator(root))
        if (entry.is_directory() && entry.path().filename().string().starts_with("subject_"))
            dirs.push_back(entry.path());
    if (dirs.empty()) throw DatasetError(root.string() + ": no subjects found");
    std::sort(dirs.begin(), dirs.end());

    std::vector<Sample> out;
    for (const auto &dir : dirs) {
        int subject = 0;
        const auto name = dir.filename().string();
        auto [p, ec] = std::from_chars(name.data() + 8, name.data() + name.size(), subject);
        if (ec != std::errc() || p != name.data() + name.size())
            throw DatasetError(dir.string() + ": directory name is not subject_<number>");
        const auto annot_path = dir / "annot.txt";
        std::ifstream annot(annot_path);
        if (!annot) throw DatasetError(annot_path.string() + ": missing annotation file");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(annot, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::istringstream is(line);
            std::vector<std::string> tok;
            for (std::string t; is >> t;) tok.push_back(t);
            if (tok.size() != 2 + 3 * kJointCount + 1)
                throw DatasetError(annot_path.string() + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(3 + 3 * kJointCount) + " fields, got " + std::to_string(tok.size()));
            Sample s;
            s.subject = subject;
            s.pose = int(parse_double(tok[0], annot_path, line_no));
            try {
                s.cover = parse_cover(tok[1]);
            } catch (const std::invalid_argument &e) {
                throw DatasetError(annot_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            for (std::size_t j = 0; j < kJointCount; ++j) {
                s.joints[j].x = parse_double(tok[2 + 3 * j], annot_path, line_no);
                s.joints[j].y = parse_double(tok[3 + 3 * j], annot_path, line_no);
                const auto &v = tok[4 + 3 * j];
                if (v != "0" && v != "1")
                    throw DatasetError(annot_path.string() + ":" + std::to_string(line_no) + ": visibility must be 0 or 1");
                s.visible[j] = v == "1";
            }
            s.head_size = parse_double(tok.back(), annot_path, line_no);
            s.m1 = read_image(dir / image_name(s.pose, s.cover, "lwir"));
            s.m2 = read_image(dir / image_name(s.pose, s.cover, "rgb"));
            try {
                validate(s);
            } catch (const std::invalid_argument &e) {
                throw DatasetError(annot_path.string() + ":" + std::to_string(line_no) +
                                   ": invariant violation: " + e.what());
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

} // namespace mcvae::data
