#include "mcvae/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "mcvae/rng.hpp"

namespace mcvae::data {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

Point rotate(Point v, double angle)
{
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double segment_distance(Point p, Point a, Point b)
{
    const Point ab = b - a, ap = p - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Point q = a + t * ab;
    return std::hypot(p.x - q.x, p.y - q.y);
}

bool inside_quad(Point p, const std::array<Point, 4> &q)
{
    // Convex quad; same-sign cross products.
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const Point a = q[i], b = q[(i + 1) % 4];
        const double c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (c > 0) ++pos;
        if (c < 0) ++neg;
    }
    return pos == 0 || neg == 0;
}

struct SubjectBuild {
    double scale;
    double body_heat;
    std::array<double, 3> shirt;
    std::array<double, 3> skin;
};

SubjectBuild subject_build(std::uint64_t seed, int subject_id)
{
    CounterRng rng = CounterRng(seed, 0x5b).derive(std::uint64_t(subject_id));
    SubjectBuild b;
    b.scale = rng.uniform(0.9, 1.05);
    b.body_heat = rng.uniform(0.75, 0.9);
    b.shirt = {0.40 + rng.uniform(-0.08, 0.08), 0.45 + rng.uniform(-0.08, 0.08), 0.62 + rng.uniform(-0.08, 0.08)};
    b.skin = {0.88 + rng.uniform(-0.06, 0.06), 0.68 + rng.uniform(-0.06, 0.06), 0.52 + rng.uniform(-0.06, 0.06)};
    return b;
}

struct Limb {
    Joint a;
    Joint b;
    double radius;
    std::array<double, 3> colour;
};

// Distinct colours per side so m2 disambiguates left from right.
const std::array<Limb, 8> kLimbs = {{
    {Joint::RShoulder, Joint::RElbow, 1.7, {0.86, 0.16, 0.14}},
    {Joint::RElbow, Joint::RWrist, 1.5, {0.95, 0.55, 0.10}},
    {Joint::LShoulder, Joint::LElbow, 1.7, {0.12, 0.30, 0.88}},
    {Joint::LElbow, Joint::LWrist, 1.5, {0.10, 0.75, 0.85}},
    {Joint::RHip, Joint::RKnee, 2.2, {0.62, 0.10, 0.45}},
    {Joint::RKnee, Joint::RAnkle, 2.0, {0.95, 0.35, 0.65}},
    {Joint::LHip, Joint::LKnee, 2.2, {0.10, 0.55, 0.20}},
    {Joint::LKnee, Joint::LAnkle, 2.0, {0.55, 0.85, 0.25}},
}};

constexpr double kHeadRadius = 3.6;
constexpr double kNeckRadius = 1.4;

// Body-part label per pixel: -1 background, 0..7 limbs, 8 torso, 9 head/neck.
std::vector<int> body_labels(const std::array<Point, kJointCount> &j)
{
    std::vector<int> label(kImageSize * kImageSize, -1);
    const auto J = [&](Joint k) { return j[index(k)]; };
    const std::array<Point, 4> torso = {J(Joint::RShoulder), J(Joint::LShoulder), J(Joint::LHip), J(Joint::RHip)};
    for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
            const Point p{double(x), double(y)};
            int l = -1;
            if (inside_quad(p, torso) || segment_distance(p, J(Joint::RShoulder), J(Joint::RHip)) <= 1.2 ||
                segment_distance(p, J(Joint::LShoulder), J(Joint::LHip)) <= 1.2)
                l = 8;
            for (std::size_t k = 0; k < kLimbs.size(); ++k)
                if (segment_distance(p, J(kLimbs[k].a), J(kLimbs[k].b)) <= kLimbs[k].radius) l = int(k);
            const Point h = J(Joint::Head);
            if (std::hypot(p.x - h.x, p.y - h.y) <= kHeadRadius ||
                segment_distance(p, J(Joint::Thorax), h) <= kNeckRadius)
                l = 9;
            label[y * kImageSize + x] = l;
        }
    return label;
}

bool on_bed(double x, double y) { return x >= kBedLeft && x <= kBedRight && y >= kBedTop && y <= kBedBottom; }

} // namespace

CoverRegion cover_region(const std::array<Point, kJointCount> &j, Cover cover)
{
    CoverRegion r{kBedBottom + 1.0, kBedLeft, kBedRight, kBedBottom};
    const auto &rs = j[index(Joint::RShoulder)], &ls = j[index(Joint::LShoulder)];
    const auto &rh = j[index(Joint::RHip)], &lh = j[index(Joint::LHip)];
    const double shoulders = std::min(rs.y, ls.y);
    const double hips = 0.5 * (rh.y + lh.y);
    switch (cover) {
    case Cover::uncovered: break;
    case Cover::light: r.top = shoulders + 0.5 * (hips - shoulders); break;
    case Cover::heavy: r.top = shoulders - 1.0; break;
    }
    return r;
}

std::vector<PoseSpec> subject_poses(std::uint64_t seed, int subject_id, int poses_per_subject)
{
    if (poses_per_subject < 1) throw std::invalid_argument("poses_per_subject must be at least 1");
    const auto build = subject_build(seed, subject_id);
    const double s = build.scale;
    const double neck = 9.0 * s, torso = 14.0 * s, shoulder_w = 5.5 * s, hip_w = 3.5 * s;
    const double upper_arm = 8.0 * s, forearm = 7.0 * s, thigh = 10.0 * s, shin = 9.0 * s;

    std::vector<PoseSpec> out;
    CounterRng subject_rng = CounterRng(seed, 0x90).derive(std::uint64_t(subject_id));
    for (int p = 0; p < poses_per_subject; ++p) {
        CounterRng rng = subject_rng.derive(std::uint64_t(p));
        PoseSpec spec;
        for (int attempt = 0;; ++attempt) {
            const double tilt = rng.uniform(-20.0, 20.0) * deg;
            const Point down = rotate({0.0, 1.0}, -tilt);
            const Point right = rotate({1.0, 0.0}, -tilt);
            const Point thorax{32.0 + rng.uniform(-3.0, 3.0), 17.0 + rng.uniform(-2.0, 2.0)};
            const Point head = thorax + neck * rotate(Point{-down.x, -down.y}, rng.uniform(-15.0, 15.0) * deg);
            const Point pelvis = thorax + torso * down;
            auto &J = spec.joints;
            J[index(Joint::Thorax)] = thorax;
            J[index(Joint::Head)] = head;
            // The patient's right side appears on the image left.
            J[index(Joint::RShoulder)] = thorax - shoulder_w * right + 1.0 * down;
            J[index(Joint::LShoulder)] = thorax + shoulder_w * right + 1.0 * down;
            J[index(Joint::RHip)] = pelvis - hip_w * right;
            J[index(Joint::LHip)] = pelvis + hip_w * right;

            for (int side = 0; side < 2; ++side) {
                const double sign = side == 0 ? 1.0 : -1.0;  // +angle swings toward image left
                const Joint sh = side == 0 ? Joint::RShoulder : Joint::LShoulder;
                const Joint el = side == 0 ? Joint::RElbow : Joint::LElbow;
                const Joint wr = side == 0 ? Joint::RWrist : Joint::LWrist;
                const Point arm_dir = rotate(down, sign * rng.uniform(-10.0, 160.0) * deg);
                J[index(el)] = J[index(sh)] + upper_arm * arm_dir;
                J[index(wr)] = J[index(el)] + forearm * rotate(arm_dir, sign * rng.uniform(-60.0, 120.0) * deg);

                const Joint hp = side == 0 ? Joint::RHip : Joint::LHip;
                const Joint kn = side == 0 ? Joint::RKnee : Joint::LKnee;
                const Joint an = side == 0 ? Joint::RAnkle : Joint::LAnkle;
                const Point leg_dir = rotate(down, sign * rng.uniform(-12.0, 35.0) * deg);
                J[index(kn)] = J[index(hp)] + thigh * leg_dir;
                J[index(an)] = J[index(kn)] + shin * rotate(leg_dir, -sign * rng.uniform(-25.0, 50.0) * deg);
            }
            const bool fits = std::all_of(J.begin(), J.end(), [](Point q) {
                return q.x >= 2.0 && q.x <= 61.0 && q.y >= 2.0 && q.y <= 61.0;
            });
            if (fits || attempt > 200) break;
        }
        out.push_back(spec);
    }
    return out;
}

Sample render_sample(std::uint64_t seed, int subject_id, int pose_index, const PoseSpec &pose, Cover cover)
{
    const auto build = subject_build(seed, subject_id);
    Sample s;
    s.subject = subject_id;
    s.pose = pose_index;
    s.cover = cover;
    s.joints = pose.joints;
    s.visible.fill(true);
    s.head_size = head_to_thorax(pose.joints);
    s.m1 = Image(kM1Channels, kImageSize, kImageSize);
    s.m2 = Image(kM2Channels, kImageSize, kImageSize);

    const auto label = body_labels(pose.joints);
    const auto region = cover_region(pose.joints, cover);
    const double attenuation = cover == Cover::heavy ? 0.8 : cover == Cover::light ? 0.9 : 1.0;

    // m1: uniform body heat, blurred; cover attenuates but does not hide it.
    std::vector<double> heat(kImageSize * kImageSize);
    for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
            const bool covered = region.contains(double(x), double(y));
            double v = on_bed(double(x), double(y)) ? (covered ? 0.18 : 0.12) : 0.05;
            if (label[y * kImageSize + x] >= 0) v = build.body_heat * (covered ? attenuation : 1.0);
            heat[y * kImageSize + x] = v;
        }
    CounterRng noise = CounterRng(seed, 0x7e)
                           .derive(std::uint64_t(subject_id))
                           .derive(std::uint64_t(pose_index))
                           .derive(std::uint64_t(cover));
    for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
            double acc = 0.0;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = int(y) + dy, xx = int(x) + dx;
                    if (yy < 0 || xx < 0 || yy >= int(kImageSize) || xx >= int(kImageSize)) continue;
                    acc += heat[std::size_t(yy) * kImageSize + std::size_t(xx)];
                    ++n;
                }
            s.m1.at(0, y, x) = std::clamp(acc / n + 0.015 * noise.normal(), 0.0, 1.0);
        }

    // m2: colour-coded parts; an opaque cover hides everything under it.
    for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
            std::array<double, 3> c = on_bed(double(x), double(y)) ? Palette::bed : Palette::floor;
            const int l = label[y * kImageSize + x];
            if (l >= 0 && l < 8) c = kLimbs[std::size_t(l)].colour;
            if (l == 8) c = build.shirt;
            if (l == 9) c = build.skin;
            if (cover != Cover::uncovered && region.contains(double(x), double(y)))
                c = cover == Cover::heavy ? Palette::blanket : Palette::sheet;
            for (std::size_t ch = 0; ch < 3; ++ch) s.m2.at(ch, y, x) = c[ch];
        }
    return s;
}

std::vector<Sample> generate_subject(std::uint64_t seed, int subject_id, int poses_per_subject)
{
    std::vector<Sample> out;
    const auto poses = subject_poses(seed, subject_id, poses_per_subject);
    for (int p = 0; p < int(poses.size()); ++p)
        for (auto c : kAllCovers) out.push_back(render_sample(seed, subject_id, p, poses[std::size_t(p)], c));
    return out;
}

std::vector<Sample> generate_dataset(std::uint64_t seed, int subjects, int poses_per_subject)
{
    if (subjects < 1) throw std::invalid_argument("need at least one subject");
    std::vector<Sample> out;
    out.reserve(std::size_t(subjects * poses_per_subject) * 3);
    for (int s = 0; s < subjects; ++s) {
        auto part = generate_subject(seed, s, poses_per_subject);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

DatasetSplit make_split(int subjects, std::uint64_t seed)
{
    if (subjects < 3) throw std::invalid_argument("a 70/15/15 split needs at least 3 subjects");
    std::vector<int> ids(static_cast<std::size_t>(subjects));
    for (int i = 0; i < subjects; ++i) ids[std::size_t(i)] = i;
    CounterRng rng(seed, 0x51);
    for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);

    const auto n_train = std::max<std::size_t>(1, std::size_t(std::lround(0.70 * subjects)));
    const auto n_val = std::max<std::size_t>(1, std::size_t(std::lround(0.15 * subjects)));
    DatasetSplit split;
    split.seed = seed;
    split.train.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_train));
    split.val.assign(ids.begin() + std::ptrdiff_t(n_train), ids.begin() + std::ptrdiff_t(n_train + n_val));
    split.test.assign(ids.begin() + std::ptrdiff_t(n_train + n_val), ids.end());
    if (split.test.empty()) throw std::invalid_argument("too few subjects for a non-empty test split");
    for (auto *v : {&split.train, &split.val, &split.test}) std::sort(v->begin(), v->end());
    return split;
}

std::vector<const Sample *> select_subjects(const std::vector<Sample> &all, const std::vector<int> &subjects)
{
    std::vector<const Sample *> out;
    for (const auto &s : all)
        if (std::find(subjects.begin(), subjects.end(), s.subject) != subjects.end()) out.push_back(&s);
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_for_vae(const std::vector<const Sample *> &samples)
{
    std::map<std::pair<int, int>, std::size_t> uncovered;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i]->cover == Cover::uncovered) uncovered[{samples[i]->subject, samples[i]->pose}] = i;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto it = uncovered.find({samples[i]->subject, samples[i]->pose});
        if (it == uncovered.end())
            throw std::invalid_argument("pair_for_vae: no uncovered sibling for pose " + samples[i]->pose_id());
        pairs.emplace_back(i, it->second);
    }
    return pairs;
}

Sample with_uncovered_m2(const Sample &s, const Sample &sibling)
{
    if (sibling.cover != Cover::uncovered || sibling.subject != s.subject || sibling.pose != s.pose)
        throw std::invalid_argument("with_uncovered_m2: " + sibling.pose_id() + " is not the uncovered sibling of " +
                                    s.pose_id());
    Sample out = s;
    out.m2 = sibling.m2;
    return out;
}

} // namespace mcvae::data
