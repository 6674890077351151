#include "gazekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include <hdf5.h>

namespace gaze {

namespace {

constexpr std::size_t kFacePixels = static_cast<std::size_t>(kFacePatchSize) * kFacePatchSize;
constexpr std::size_t kEyePixels = static_cast<std::size_t>(kEyePatchSize) * kEyePatchSize;

enum class Dtype { U8, U16, I32, F32, F64 };

hid_t file_type(Dtype t) {
    switch (t) {
    case Dtype::U8: return H5T_STD_U8LE;
    case Dtype::U16: return H5T_STD_U16LE;
    case Dtype::I32: return H5T_STD_I32LE;
    case Dtype::F32: return H5T_IEEE_F32LE;
    case Dtype::F64: return H5T_IEEE_F64LE;
    }
    return H5T_STD_U8LE;
}

hid_t mem_type(Dtype t) {
    switch (t) {
    case Dtype::U8: return H5T_NATIVE_UINT8;
    case Dtype::U16: return H5T_NATIVE_UINT16;
    case Dtype::I32: return H5T_NATIVE_INT32;
    case Dtype::F32: return H5T_NATIVE_FLOAT;
    case Dtype::F64: return H5T_NATIVE_DOUBLE;
    }
    return H5T_NATIVE_UINT8;
}

const char* dtype_name(Dtype t) {
    switch (t) {
    case Dtype::U8: return "uint8";
    case Dtype::U16: return "uint16";
    case Dtype::I32: return "int32";
    case Dtype::F32: return "float32";
    case Dtype::F64: return "float64";
    }
    return "?";
}

bool dtype_matches(hid_t disk, Dtype want) {
    const H5T_class_t cls = H5Tget_class(disk);
    const std::size_t size = H5Tget_size(disk);
    switch (want) {
    case Dtype::U8: return cls == H5T_INTEGER && size == 1 && H5Tget_sign(disk) == H5T_SGN_NONE;
    case Dtype::U16: return cls == H5T_INTEGER && size == 2 && H5Tget_sign(disk) == H5T_SGN_NONE;
    case Dtype::I32: return cls == H5T_INTEGER && size == 4 && H5Tget_sign(disk) == H5T_SGN_2;
    case Dtype::F32: return cls == H5T_FLOAT && size == 4;
    case Dtype::F64: return cls == H5T_FLOAT && size == 8;
    }
    return false;
}

/// Descriptor of one dataset key: dtype plus the fixed trailing dimensions.
struct KeySpec {
    const char* name;
    Dtype dtype;
    std::vector<hsize_t> inner; // dims after the leading sample/session dim
    bool per_session;
};

std::vector<KeySpec> schema() {
    const auto f = static_cast<hsize_t>(kFacePatchSize);
    const auto e = static_cast<hsize_t>(kEyePatchSize);
    return {
        {"face_center", Dtype::F32, {3}, false},
        {"face_color", Dtype::U8, {f, f, 3}, false},
        {"face_depth", Dtype::U16, {f, f}, false},
        {"face_landmarks", Dtype::F32, {5, 2}, false},
        {"face_transformation", Dtype::F32, {3, 3}, false},
        {"gaze", Dtype::F32, {2}, false},
        {"gaze_point", Dtype::F32, {2}, false},
        {"head_rot_norm", Dtype::F32, {3}, false},
        {"in_recording_index", Dtype::I32, {}, false},
        {"left_eye_color", Dtype::U8, {e, e, 3}, false},
        {"left_eye_depth", Dtype::U16, {e, e}, false},
        {"mouse_distance", Dtype::F32, {}, false},
        {"on_grid", Dtype::U8, {}, false},
        {"recording_index", Dtype::I32, {}, false},
        {"recording_session", Dtype::I32, {}, false},
        {"right_eye_color", Dtype::U8, {e, e, 3}, false},
        {"right_eye_depth", Dtype::U16, {e, e}, false},
        {"extrinsics", Dtype::F64, {3, 4}, true},
        {"monitor", Dtype::I32, {3, 2}, true},
    };
}

std::size_t inner_size(const KeySpec& k) {
    std::size_t s = 1;
    for (const auto d : k.inner) s *= static_cast<std::size_t>(d);
    return s;
}

struct FieldMap {
    void* data(SubjectFile& s, const std::string& name) const {
        return const_cast<void*>(data(static_cast<const SubjectFile&>(s), name));
    }
    const void* data(const SubjectFile& s, const std::string& name) const {
        if (name == "face_center") return s.face_center.data();
        if (name == "face_color") return s.face_color.data();
        if (name == "face_depth") return s.face_depth.data();
        if (name == "face_landmarks") return s.face_landmarks.data();
        if (name == "face_transformation") return s.face_transformation.data();
        if (name == "gaze") return s.gaze.data();
        if (name == "gaze_point") return s.gaze_point.data();
        if (name == "head_rot_norm") return s.head_rot_norm.data();
        if (name == "in_recording_index") return s.in_recording_index.data();
        if (name == "left_eye_color") return s.left_eye_color.data();
        if (name == "left_eye_depth") return s.left_eye_depth.data();
        if (name == "mouse_distance") return s.mouse_distance.data();
        if (name == "on_grid") return s.on_grid.data();
        if (name == "recording_index") return s.recording_index.data();
        if (name == "recording_session") return s.recording_session.data();
        if (name == "right_eye_color") return s.right_eye_color.data();
        if (name == "right_eye_depth") return s.right_eye_depth.data();
        if (name == "extrinsics") return s.extrinsics.data();
        if (name == "monitor") return s.monitor.data();
        throw SchemaError("unknown dataset key " + name);
    }
    std::size_t element_count(const SubjectFile& s, const std::string& name) const {
        if (name == "face_center") return s.face_center.size();
        if (name == "face_color") return s.face_color.size();
        if (name == "face_depth") return s.face_depth.size();
        if (name == "face_landmarks") return s.face_landmarks.size();
        if (name == "face_transformation") return s.face_transformation.size();
        if (name == "gaze") return s.gaze.size();
        if (name == "gaze_point") return s.gaze_point.size();
        if (name == "head_rot_norm") return s.head_rot_norm.size();
        if (name == "in_recording_index") return s.in_recording_index.size();
        if (name == "left_eye_color") return s.left_eye_color.size();
        if (name == "left_eye_depth") return s.left_eye_depth.size();
        if (name == "mouse_distance") return s.mouse_distance.size();
        if (name == "on_grid") return s.on_grid.size();
        if (name == "recording_index") return s.recording_index.size();
        if (name == "recording_session") return s.recording_session.size();
        if (name == "right_eye_color") return s.right_eye_color.size();
        if (name == "right_eye_depth") return s.right_eye_depth.size();
        if (name == "extrinsics") return s.extrinsics.size();
        if (name == "monitor") return s.monitor.size();
        throw SchemaError("unknown dataset key " + name);
    }
    void resize(SubjectFile& s, const std::string& name, std::size_t count) const {
        if (name == "face_center") s.face_center.resize(count);
        else if (name == "face_color") s.face_color.resize(count);
        else if (name == "face_depth") s.face_depth.resize(count);
        else if (name == "face_landmarks") s.face_landmarks.resize(count);
        else if (name == "face_transformation") s.face_transformation.resize(count);
        else if (name == "gaze") s.gaze.resize(count);
        else if (name == "gaze_point") s.gaze_point.resize(count);
        else if (name == "head_rot_norm") s.head_rot_norm.resize(count);
        else if (name == "in_recording_index") s.in_recording_index.resize(count);
        else if (name == "left_eye_color") s.left_eye_color.resize(count);
        else if (name == "left_eye_depth") s.left_eye_depth.resize(count);
        else if (name == "mouse_distance") s.mouse_distance.resize(count);
        else if (name == "on_grid") s.on_grid.resize(count);
        else if (name == "recording_index") s.recording_index.resize(count);
        else if (name == "recording_session") s.recording_session.resize(count);
        else if (name == "right_eye_color") s.right_eye_color.resize(count);
        else if (name == "right_eye_depth") s.right_eye_depth.resize(count);
        else if (name == "extrinsics") s.extrinsics.resize(count);
        else if (name == "monitor") s.monitor.resize(count);
        else throw SchemaError("unknown dataset key " + name);
    }
};

struct HidCloser {
    herr_t (*close)(hid_t);
    hid_t id;
    ~HidCloser() {
        if (id >= 0) close(id);
    }
};

} // namespace

SubjectFile SubjectFile::create(std::size_t samples, std::size_t sessions) {
    SubjectFile s;
    s.samples = samples;
    s.sessions = sessions;
    s.face_center.resize(samples * 3);
    s.face_color.resize(samples * kFacePixels * 3);
    s.face_depth.resize(samples * kFacePixels);
    s.face_landmarks.resize(samples * 10);
    s.face_transformation.resize(samples * 9);
    s.gaze.resize(samples * 2);
    s.gaze_point.resize(samples * 2);
    s.head_rot_norm.resize(samples * 3);
    s.in_recording_index.resize(samples);
    s.left_eye_color.resize(samples * kEyePixels * 3);
    s.left_eye_depth.resize(samples * kEyePixels);
    s.mouse_distance.assign(samples, -1.0f);
    s.on_grid.resize(samples);
    s.recording_index.resize(samples);
    s.recording_session.resize(samples);
    s.right_eye_color.resize(samples * kEyePixels * 3);
    s.right_eye_depth.resize(samples * kEyePixels);
    s.extrinsics.resize(sessions * 12);
    s.monitor.resize(sessions * 6);
    return s;
}

Eigen::Matrix3d SubjectFile::gaze_rotation(std::size_t i) const {
    Eigen::Matrix3d r;
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            r(row, col) = static_cast<double>(face_transformation[i * 9 + row * 3 + col]);
        }
    }
    return r;
}

void SubjectFile::set_gaze_rotation(std::size_t i, const Eigen::Matrix3d& r) {
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            face_transformation[i * 9 + row * 3 + col] = static_cast<float>(r(row, col));
        }
    }
}

Vec3 SubjectFile::face_center_vec(std::size_t i) const {
    return Vec3(face_center[i * 3], face_center[i * 3 + 1], face_center[i * 3 + 2]);
}

GazeAngles SubjectFile::gaze_angles(std::size_t i) const {
    return GazeAngles{static_cast<double>(gaze[i * 2]), static_cast<double>(gaze[i * 2 + 1])};
}

ScreenPoint SubjectFile::gaze_point_px(std::size_t i) const {
    return ScreenPoint{static_cast<double>(gaze_point[i * 2]),
                       static_cast<double>(gaze_point[i * 2 + 1])};
}

Eigen::Vector2d SubjectFile::landmark(std::size_t i, int which) const {
    return Eigen::Vector2d(face_landmarks[i * 10 + static_cast<std::size_t>(which) * 2],
                           face_landmarks[i * 10 + static_cast<std::size_t>(which) * 2 + 1]);
}

Extrinsics SubjectFile::session_extrinsics(std::size_t session) const {
    Eigen::Matrix4d e = Eigen::Matrix4d::Identity();
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 4; ++col) {
            e(row, col) = extrinsics[session * 12 + static_cast<std::size_t>(row) * 4 + col];
        }
    }
    return Extrinsics(e);
}

void SubjectFile::set_session_extrinsics(std::size_t session, const Extrinsics& ext) {
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 4; ++col) {
            extrinsics[session * 12 + static_cast<std::size_t>(row) * 4 + col] =
                ext.matrix()(row, col);
        }
    }
}

MonitorSpec SubjectFile::session_monitor(std::size_t session) const {
    const auto* m = &monitor[session * 6];
    MonitorSpec spec;
    spec.width_px = m[0];
    spec.height_px = m[1];
    spec.offset_x = m[2];
    spec.offset_y = m[3];
    spec.width_mm = m[4];
    spec.height_mm = m[5];
    return spec;
}

void SubjectFile::set_session_monitor(std::size_t session, const MonitorSpec& spec) {
    auto* m = &monitor[session * 6];
    m[0] = static_cast<std::int32_t>(std::lround(spec.width_px));
    m[1] = static_cast<std::int32_t>(std::lround(spec.height_px));
    m[2] = static_cast<std::int32_t>(std::lround(spec.offset_x));
    m[3] = static_cast<std::int32_t>(std::lround(spec.offset_y));
    m[4] = static_cast<std::int32_t>(std::lround(spec.width_mm));
    m[5] = static_cast<std::int32_t>(std::lround(spec.height_mm));
}

ImageU16 SubjectFile::face_depth_image(std::size_t i) const {
    ImageU16 img(kFacePatchSize, kFacePatchSize, 1);
    std::memcpy(img.data(), &face_depth[i * kFacePixels], kFacePixels * sizeof(std::uint16_t));
    return img;
}

ImageU8 SubjectFile::right_eye_color_image(std::size_t i) const {
    ImageU8 img(kEyePatchSize, kEyePatchSize, 3);
    std::memcpy(img.data(), &right_eye_color[i * kEyePixels * 3], kEyePixels * 3);
    return img;
}

ImageU8 SubjectFile::left_eye_color_image(std::size_t i) const {
    ImageU8 img(kEyePatchSize, kEyePatchSize, 3);
    std::memcpy(img.data(), &left_eye_color[i * kEyePixels * 3], kEyePixels * 3);
    return img;
}

void write_subject(const std::filesystem::path& path, const SubjectFile& subject) {
    const FieldMap fields;
    for (const auto& key : schema()) {
        const std::size_t lead = key.per_session ? subject.sessions : subject.samples;
        if (fields.element_count(subject, key.name) != lead * inner_size(key)) {
            throw SchemaError(std::string("write_subject: array size of '") + key.name +
                              "' does not match the declared sample/session count");
        }
    }

    const hid_t file = H5Fcreate(path.string().c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
    if (file < 0) throw IoError("cannot create " + path.string());
    HidCloser file_guard{H5Fclose, file};

    for (const auto& key : schema()) {
        std::vector<hsize_t> dims;
        dims.push_back(key.per_session ? subject.sessions : subject.samples);
        dims.insert(dims.end(), key.inner.begin(), key.inner.end());

        const hid_t space = H5Screate_simple(static_cast<int>(dims.size()), dims.data(), nullptr);
        HidCloser space_guard{H5Sclose, space};
        const hid_t dset = H5Dcreate2(file, key.name, file_type(key.dtype), space, H5P_DEFAULT,
                                      H5P_DEFAULT, H5P_DEFAULT);
        if (dset < 0) throw IoError(std::string("cannot create dataset ") + key.name);
        HidCloser dset_guard{H5Dclose, dset};
        if (dims[0] > 0) {
            if (H5Dwrite(dset, mem_type(key.dtype), H5S_ALL, H5S_ALL, H5P_DEFAULT,
                         fields.data(const_cast<SubjectFile&>(subject), key.name)) < 0) {
                throw IoError(std::string("failed writing dataset ") + key.name);
            }
        }
    }
}

SubjectFile read_subject(const std::filesystem::path& path) {
    const hid_t file = H5Fopen(path.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
    if (file < 0) throw IoError("cannot open " + path.string());
    HidCloser file_guard{H5Fclose, file};

    SubjectFile subject;
    const FieldMap fields;
    std::vector<std::string> problems;
    hsize_t lead_samples = 0, lead_sessions = 0;
    bool have_samples = false, have_sessions = false;

    for (const auto& key : schema()) {
        if (H5Lexists(file, key.name, H5P_DEFAULT) <= 0) {
            problems.push_back(std::string("missing key '") + key.name + "'");
            continue;
        }
        const hid_t dset = H5Dopen2(file, key.name, H5P_DEFAULT);
        if (dset < 0) {
            problems.push_back(std::string("unreadable key '") + key.name + "'");
            continue;
        }
        HidCloser dset_guard{H5Dclose, dset};

        const hid_t dtype = H5Dget_type(dset);
        HidCloser type_guard{H5Tclose, dtype};
        if (!dtype_matches(dtype, key.dtype)) {
            problems.push_back(std::string("key '") + key.name + "' has the wrong dtype, expected " +
                               dtype_name(key.dtype));
            continue;
        }

        const hid_t space = H5Dget_space(dset);
        HidCloser space_guard{H5Sclose, space};
        const int rank = H5Sget_simple_extent_ndims(space);
        std::vector<hsize_t> dims(static_cast<std::size_t>(std::max(rank, 0)));
        H5Sget_simple_extent_dims(space, dims.data(), nullptr);

        const std::size_t want_rank = key.inner.size() + 1;
        bool shape_ok = dims.size() == want_rank;
        for (std::size_t d = 0; shape_ok && d < key.inner.size(); ++d) {
            shape_ok = dims[d + 1] == key.inner[d];
        }
        if (!shape_ok) {
            std::ostringstream os;
            os << "key '" << key.name << "' has the wrong shape (";
            for (std::size_t d = 0; d < dims.size(); ++d) os << (d ? "," : "") << dims[d];
            os << "), expected (n";
            for (const auto d : key.inner) os << "," << d;
            os << ")";
            problems.push_back(os.str());
            continue;
        }

        hsize_t& lead = key.per_session ? lead_sessions : lead_samples;
        bool& have = key.per_session ? have_sessions : have_samples;
        if (have && dims[0] != lead) {
            problems.push_back(std::string("key '") + key.name +
                               "' has a mismatched leading dimension");
            continue;
        }
        lead = dims[0];
        have = true;

        fields.resize(subject, key.name, static_cast<std::size_t>(dims[0]) * inner_size(key));
        if (dims[0] > 0) {
            if (H5Dread(dset, mem_type(key.dtype), H5S_ALL, H5S_ALL, H5P_DEFAULT,
                        fields.data(subject, key.name)) < 0) {
                problems.push_back(std::string("failed reading key '") + key.name + "'");
            }
        }
    }

    if (!problems.empty()) {
        std::string joined = "schema violations in " + path.string() + ": ";
        for (std::size_t i = 0; i < problems.size(); ++i) {
            joined += (i ? "; " : "") + problems[i];
        }
        throw SchemaError(joined);
    }
    subject.samples = static_cast<std::size_t>(lead_samples);
    subject.sessions = static_cast<std::size_t>(lead_sessions);
    return subject;
}

std::vector<Violation> validate(const SubjectFile& s) {
    std::vector<Violation> out;
    const auto n = static_cast<std::ptrdiff_t>(s.samples);

    for (std::ptrdiff_t i = 0; i < n; ++i) {
        for (int c = 0; c < 10; ++c) {
            const float v = s.face_landmarks[static_cast<std::size_t>(i) * 10 + c];
            if (!(v >= 0.0f && v <= static_cast<float>(kFacePatchSize))) {
                out.push_back({"face_landmarks", i, "landmark coordinate outside [0, 448]"});
                break;
            }
        }
        const auto i_r = s.recording_index[static_cast<std::size_t>(i)];
        if (i_r < 0 || i_r >= kRecordingsPerSession) {
            out.push_back({"recording_index", i, "recording index outside [0, 132)"});
        }
        const auto i_s = s.recording_session[static_cast<std::size_t>(i)];
        if (i_s < 0 || static_cast<std::size_t>(i_s) >= s.sessions) {
            out.push_back({"recording_session", i, "session index outside the stored sessions"});
        }
        if (s.in_recording_index[static_cast<std::size_t>(i)] < 0) {
            out.push_back({"in_recording_index", i, "negative in-recording index"});
        }
        const auto grid = s.on_grid[static_cast<std::size_t>(i)];
        if (grid != 0 && grid != 1) {
            out.push_back({"on_grid", i, "on_grid not boolean"});
        }
        for (int c = 0; c < 2; ++c) {
            if (!std::isfinite(s.gaze[static_cast<std::size_t>(i) * 2 + c])) {
                out.push_back({"gaze", i, "non-finite gaze angle"});
                break;
            }
        }
    }

    std::set<std::tuple<std::int32_t, std::int32_t, std::int32_t>> seen;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto key = std::make_tuple(s.recording_session[static_cast<std::size_t>(i)],
                                         s.recording_index[static_cast<std::size_t>(i)],
                                         s.in_recording_index[static_cast<std::size_t>(i)]);
        if (!seen.insert(key).second) {
            out.push_back({"in_recording_index", i,
                           "(session, recording, in-recording) tuple is not unique"});
        }
    }

    std::int32_t max_session = -1;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        max_session = std::max(max_session, s.recording_session[static_cast<std::size_t>(i)]);
    }
    if (n > 0 && static_cast<std::size_t>(max_session + 1) != s.sessions) {
        out.push_back({"extrinsics", -1,
                       "extrinsics row count does not equal max(recording_session) + 1"});
    }
    return out;
}

Phase phase_of(int recording_index) {
    if (recording_index >= 0 && recording_index < 100) return Phase::SinglePointSingleSample;
    if (recording_index >= 100 && recording_index < 122) return Phase::SinglePointContinuous;
    if (recording_index >= 122 && recording_index < kRecordingsPerSession) {
        return Phase::MovingPointContinuous;
    }
    throw SchemaError("recording index " + std::to_string(recording_index) + " outside [0, 132)");
}

SplitAssignment split_assign(const std::string& subject_id) {
    static const std::map<std::string, SplitAssignment> table = {
        {"p000", {true, 0}},  {"p001", {false, 1}}, {"p002", {false, 1}}, {"p003", {false, 4}},
        {"p004", {false, 2}}, {"p005", {true, 0}},  {"p006", {true, 0}},  {"p007", {false, 3}},
        {"p008", {false, 3}}, {"p009", {false, 2}}, {"p010", {false, 5}}, {"p011", {false, 4}},
    };
    const auto it = table.find(subject_id);
    if (it == table.end()) throw SchemaError("unknown subject id " + subject_id);
    return it->second;
}

std::vector<std::string> dataset_subjects() {
    std::vector<std::string> ids;
    for (int i = 0; i < 12; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "p%03d", i);
        ids.emplace_back(buf);
    }
    return ids;
}

} // namespace gaze
