#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gazekit/geometry.hpp"
#include "gazekit/image.hpp"

namespace gaze {

/// Fixed patch sizes of the on-disk schema.
inline constexpr int kFacePatchSize = 448;
inline constexpr int kEyePatchSize = 112;
inline constexpr int kRecordingsPerSession = 132;

/// One subject's data, flat arrays exactly as stored on disk. All per-sample
/// arrays share the leading dimension n; extrinsics/monitor are per session.
struct SubjectFile {
    std::size_t samples = 0;
    std::size_t sessions = 0;

    std::vector<float> face_center;           // n x 3, camera frame mm
    std::vector<std::uint8_t> face_color;     // n x 448 x 448 x 3
    std::vector<std::uint16_t> face_depth;    // n x 448 x 448, mm
    std::vector<float> face_landmarks;        // n x 5 x 2, warped, in [0, 448]
    std::vector<float> face_transformation;   // n x 3 x 3, gaze rotation R
    std::vector<float> gaze;                  // n x 2, normalized angles (rad)
    std::vector<float> gaze_point;            // n x 2, screen px
    std::vector<float> head_rot_norm;         // n x 3, (roll, pitch, yaw)
    std::vector<std::int32_t> in_recording_index; // n
    std::vector<std::uint8_t> left_eye_color;  // n x 112 x 112 x 3
    std::vector<std::uint16_t> left_eye_depth; // n x 112 x 112
    std::vector<float> mouse_distance;         // n, px; -1 when not recorded
    std::vector<std::uint8_t> on_grid;         // n, {0, 1}
    std::vector<std::int32_t> recording_index; // n, [0, 132)
    std::vector<std::int32_t> recording_session; // n, [0, sessions)
    std::vector<std::uint8_t> right_eye_color;  // n x 112 x 112 x 3
    std::vector<std::uint16_t> right_eye_depth; // n x 112 x 112
    std::vector<double> extrinsics;            // m x 3 x 4, top rows of E
    std::vector<std::int32_t> monitor;         // m x 3 x 2

    /// Zero-filled file with consistent array sizes.
    static SubjectFile create(std::size_t samples, std::size_t sessions);

    // convenience accessors
    Eigen::Matrix3d gaze_rotation(std::size_t i) const;
    Vec3 face_center_vec(std::size_t i) const;
    GazeAngles gaze_angles(std::size_t i) const;
    ScreenPoint gaze_point_px(std::size_t i) const;
    Eigen::Vector2d landmark(std::size_t i, int which) const; // 0..4
    Extrinsics session_extrinsics(std::size_t session) const;
    MonitorSpec session_monitor(std::size_t session) const;
    ImageU16 face_depth_image(std::size_t i) const;
    ImageU8 right_eye_color_image(std::size_t i) const;
    ImageU8 left_eye_color_image(std::size_t i) const;

    void set_gaze_rotation(std::size_t i, const Eigen::Matrix3d& r);
    void set_session_extrinsics(std::size_t session, const Extrinsics& e);
    void set_session_monitor(std::size_t session, const MonitorSpec& m);
};

/// Lossless round trip against the flat HDF5 layout. read_subject throws
/// SchemaError listing every missing key, wrong shape and wrong dtype;
/// write_subject throws SchemaError on internally inconsistent array sizes.
SubjectFile read_subject(const std::filesystem::path& path);
void write_subject(const std::filesystem::path& path, const SubjectFile& subject);

struct Violation {
    std::string key;
    std::ptrdiff_t index = -1; // sample index, -1 for file-level rules
    std::string rule;
};

/// Value-level invariants: landmark range, index ranges, unique
/// (session, recording, in-recording) tuples, session/extrinsics agreement.
std::vector<Violation> validate(const SubjectFile& subject);

enum class Phase {
    SinglePointSingleSample,  // i_r in [0, 100)
    SinglePointContinuous,    // i_r in [100, 122)
    MovingPointContinuous,    // i_r in [122, 132)
};

/// Phase of a recording index. Throws SchemaError outside [0, 132).
Phase phase_of(int recording_index);

struct SplitAssignment {
    bool test = false;
    int validation_fold = 0; // 1..5 for training subjects, 0 for test subjects
};

/// Fixed subject split tables. Throws SchemaError for unknown ids
/// (known ids are p000..p011).
SplitAssignment split_assign(const std::string& subject_id);

/// All subject ids of the dataset, p000..p011.
std::vector<std::string> dataset_subjects();

} // namespace gaze
