#include "gazekit/replay.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gazekit/depthproc.hpp"
#include "gazekit/metrics.hpp"
#include "gazekit/params_io.hpp"

namespace gaze {

namespace {

/// Grayscale average pooling of an eye crop into a flat feature vector.
Eigen::VectorXd pooled_eye_features(const ImageU8& eye, int pool) {
    const int cells = kEyePatchSize / pool;
    Eigen::VectorXd features(cells * cells);
    for (int cy = 0; cy < cells; ++cy) {
        for (int cx = 0; cx < cells; ++cx) {
            double sum = 0.0;
            for (int y = cy * pool; y < (cy + 1) * pool; ++y) {
                for (int x = cx * pool; x < (cx + 1) * pool; ++x) {
                    double gray = 0.0;
                    for (int c = 0; c < eye.channels(); ++c) gray += eye.at(y, x, c);
                    sum += gray / eye.channels();
                }
            }
            features[cy * cells + cx] = sum / (pool * pool * 255.0);
        }
    }
    return features;
}

/// A 2D filter instance selected by kind; None passes through.
class PointFilter {
public:
    PointFilter(FilterKind kind, const KalmanConfig& config) : kind_(kind), config_(config) {}

    Eigen::Vector2d step(const Eigen::Vector2d& z) {
        switch (kind_) {
        case FilterKind::None: return z;
        case FilterKind::Kalman:
            if (!kalman_) {
                kalman_.emplace(z, config_);
                return z;
            }
            return kalman_->step(z);
        case FilterKind::Avg3: return avg3_.step(z);
        }
        return z;
    }

    void reset() {
        kalman_.reset();
        avg3_.reset();
    }

private:
    FilterKind kind_;
    KalmanConfig config_;
    std::optional<Kalman2D> kalman_;
    Avg3 avg3_;
};

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

int ReplayModel::eye_feature_dim() const {
    const int cells = kEyePatchSize / eye_pool;
    return cells * cells;
}

ReplayModel ReplayModel::init(const HyperParams& hp, std::uint64_t seed) {
    hp.validate();
    if (hp.n_tokens != 5) {
        throw ConfigError("replay model: the four-token pipeline needs n_tokens = 5");
    }
    ReplayModel m;
    m.hp = hp;
    m.fusion = FusionParams::init(hp, seed);
    Rng rng(seed + 0x9e3779b9);
    auto uniform = [&](Eigen::Index rows, Eigen::Index cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            for (Eigen::Index r = 0; r < rows; ++r) w(r, c) = rng.uniform(-bound, bound);
        }
        return w;
    };
    m.w_right_eye = uniform(m.eye_feature_dim(), hp.d_model);
    m.b_right_eye = Eigen::VectorXd::Zero(hp.d_model);
    m.w_left_eye = uniform(m.eye_feature_dim(), hp.d_model);
    m.b_left_eye = Eigen::VectorXd::Zero(hp.d_model);
    m.w_headpose = uniform(kHeadposeFeatureDim, hp.d_model);
    m.b_headpose = Eigen::VectorXd::Zero(hp.d_model);
    m.w_depth = uniform(m.depth_feature_dim(), hp.d_model);
    m.b_depth = Eigen::VectorXd::Zero(hp.d_model);
    return m;
}

void save_replay_model(const std::filesystem::path& path, const ReplayModel& model) {
    std::vector<TensorRef> refs;
    for (auto& r : tensor_refs(const_cast<FusionParams&>(model.fusion))) {
        refs.push_back({"fusion." + r.name, r.data, r.rows, r.cols});
    }
    auto add = [&](const char* name, const Eigen::MatrixXd& m) {
        refs.push_back({name, const_cast<double*>(m.data()), m.rows(), m.cols()});
    };
    auto add_vec = [&](const char* name, const Eigen::VectorXd& v) {
        refs.push_back({name, const_cast<double*>(v.data()), v.size(), 1});
    };
    add("proj.right_eye.w", model.w_right_eye);
    add_vec("proj.right_eye.b", model.b_right_eye);
    add("proj.left_eye.w", model.w_left_eye);
    add_vec("proj.left_eye.b", model.b_left_eye);
    add("proj.headpose.w", model.w_headpose);
    add_vec("proj.headpose.b", model.b_headpose);
    add("proj.depth.w", model.w_depth);
    add_vec("proj.depth.b", model.b_depth);

    nlohmann::json meta{{"hyperparams", hyperparams_to_json(model.hp)},
                        {"eye_pool", model.eye_pool},
                        {"depth_r", model.depth_r}};
    save_tensors(path, refs, meta);
}

ReplayModel load_replay_model(const std::filesystem::path& path) {
    const TensorFile file = load_tensors(path);
    const nlohmann::json meta = nlohmann::json::parse(file.meta_json);

    ReplayModel m;
    m.hp = hyperparams_from_json(meta.at("hyperparams"));
    m.eye_pool = meta.value("eye_pool", 8);
    m.depth_r = meta.value("depth_r", 5);

    m.fusion = FusionParams::zeros(m.hp);
    for (auto& ref : tensor_refs(m.fusion)) {
        const Eigen::MatrixXd& src = file.require("fusion." + ref.name);
        if (src.rows() != ref.rows || src.cols() != ref.cols) {
            throw SchemaError("replay model: tensor 'fusion." + ref.name + "' has the wrong shape");
        }
        std::copy(src.data(), src.data() + src.size(), ref.data);
    }
    m.w_right_eye = file.require("proj.right_eye.w");
    m.b_right_eye = file.require("proj.right_eye.b");
    m.w_left_eye = file.require("proj.left_eye.w");
    m.b_left_eye = file.require("proj.left_eye.b");
    m.w_headpose = file.require("proj.headpose.w");
    m.b_headpose = file.require("proj.headpose.b");
    m.w_depth = file.require("proj.depth.w");
    m.b_depth = file.require("proj.depth.b");
    return m;
}

std::vector<ReplayRow> replay_subject(const SubjectFile& subject, const ReplayModel* model,
                                      const StubSpec* stub, const ReplayOptions& options) {
    if ((model == nullptr) == (stub == nullptr)) {
        throw ConfigError("replay: exactly one of model/stub must be given");
    }

    std::vector<ReplayRow> rows;
    rows.reserve(subject.samples);
    Rng noise_rng(stub ? stub->seed : 0);

    std::vector<PointFilter> landmark_filters(5, PointFilter(options.filter_landmarks, options.kalman));
    PointFilter angle_filter(options.filter_angles, options.kalman);
    PointFilter point_filter(options.filter_point, options.kalman);

    std::int32_t last_session = -1, last_recording = -1;
    for (std::size_t i = 0; i < subject.samples; ++i) {
        ReplayRow row;
        row.index = i;
        row.truth = subject.gaze_angles(i);
        row.truth_point = subject.gaze_point_px(i);

        // a new recording is a new continuous stream; filters restart
        const auto session = subject.recording_session[i];
        const auto recording = subject.recording_index[i];
        if (session != last_session || recording != last_recording) {
            for (auto& f : landmark_filters) f.reset();
            angle_filter.reset();
            point_filter.reset();
            last_session = session;
            last_recording = recording;
        }

        try {
            const MonitorSpec monitor = subject.session_monitor(static_cast<std::size_t>(session));
            const Extrinsics extrinsics =
                subject.session_extrinsics(static_cast<std::size_t>(session));
            const Eigen::Matrix3d rotation = subject.gaze_rotation(i);
            const Vec3 face_center = subject.face_center_vec(i);

            std::array<Eigen::Vector2d, 5> landmarks;
            for (int l = 0; l < 5; ++l) {
                landmarks[static_cast<std::size_t>(l)] =
                    landmark_filters[static_cast<std::size_t>(l)].step(subject.landmark(i, l));
            }

            if (stub) {
                row.raw = row.truth;
                row.raw.pitch += stub->offset_pitch_rad;
                row.raw.yaw += stub->offset_yaw_rad;
                if (stub->noise_rad > 0.0) {
                    row.raw.pitch += noise_rng.normal(0.0, stub->noise_rad);
                    row.raw.yaw += noise_rng.normal(0.0, stub->noise_rad);
                }
            } else {
                const Eigen::VectorXd right_features =
                    pooled_eye_features(subject.right_eye_color_image(i), model->eye_pool);
                const Eigen::VectorXd left_features =
                    pooled_eye_features(subject.left_eye_color_image(i), model->eye_pool);

                Eigen::VectorXd head_features(ReplayModel::kHeadposeFeatureDim);
                for (int l = 0; l < 5; ++l) {
                    head_features.segment<2>(2 * l) =
                        landmarks[static_cast<std::size_t>(l)] / kFacePatchSize;
                }
                for (int c = 0; c < 3; ++c) {
                    head_features[10 + c] = subject.head_rot_norm[i * 3 + static_cast<std::size_t>(c)];
                }

                const EqualizedDepth eq = histogram_equalize(subject.face_depth_image(i));
                const std::vector<double> patches = extract_depth_patches(
                    eq, landmarks[0], landmarks[1], model->depth_r);
                Eigen::VectorXd depth_features(model->depth_feature_dim());
                for (Eigen::Index c = 0; c < depth_features.size(); ++c) {
                    depth_features[c] = patches[static_cast<std::size_t>(c)] / 1000.0;
                }

                TokenSet tokens(4, model->hp.d_model);
                tokens.row(0) = project_to_token(right_features, model->w_right_eye, model->b_right_eye);
                tokens.row(1) = project_to_token(left_features, model->w_left_eye, model->b_left_eye);
                tokens.row(2) = project_to_token(head_features, model->w_headpose, model->b_headpose);
                tokens.row(3) = project_to_token(depth_features, model->w_depth, model->b_depth);
                row.raw = fusion_forward(tokens, model->fusion, model->hp);
            }

            row.calibrated = options.bias ? apply_subject_bias(row.raw, *options.bias) : row.raw;
            const Eigen::Vector2d filtered = angle_filter.step(
                Eigen::Vector2d(row.calibrated.pitch, row.calibrated.yaw));
            row.filtered = GazeAngles{filtered.x(), filtered.y()};

            const ScreenPoint point = gaze_point_from_prediction(row.filtered, rotation,
                                                                 face_center, extrinsics, monitor);
            const Eigen::Vector2d smoothed = point_filter.step(Eigen::Vector2d(point.x, point.y));
            row.predicted_point = ScreenPoint{smoothed.x(), smoothed.y()};

            row.error_deg = angular_error_deg(row.truth, row.filtered);
            row.error_mm = euclidean_error_mm(row.truth_point, row.predicted_point, monitor);
        } catch (const Error& e) {
            row.error = e.what();
            row.error_deg = std::numeric_limits<double>::quiet_NaN();
            row.error_mm = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_replay_csv(const std::filesystem::path& path, std::span<const ReplayRow> rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "index,gt_pitch,gt_yaw,gt_x,gt_y,raw_pitch,raw_yaw,cal_pitch,cal_yaw,"
           "fil_pitch,fil_yaw,pred_x,pred_y,e_deg,d_mm,error\n";
    for (const auto& r : rows) {
        out << r.index << ',' << format_double(r.truth.pitch) << ',' << format_double(r.truth.yaw)
            << ',' << format_double(r.truth_point.x) << ',' << format_double(r.truth_point.y)
            << ',' << format_double(r.raw.pitch) << ',' << format_double(r.raw.yaw) << ','
            << format_double(r.calibrated.pitch) << ',' << format_double(r.calibrated.yaw) << ','
            << format_double(r.filtered.pitch) << ',' << format_double(r.filtered.yaw) << ','
            << format_double(r.predicted_point.x) << ',' << format_double(r.predicted_point.y)
            << ',' << format_double(r.error_deg) << ',' << format_double(r.error_mm) << ','
            << r.error << '\n';
    }
}

std::vector<ReplayRow> read_replay_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");

    std::vector<ReplayRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 15) throw IoError(path.string() + ": malformed row");
        ReplayRow r;
        r.index = std::stoull(cells[0]);
        r.truth = {std::stod(cells[1]), std::stod(cells[2])};
        r.truth_point = {std::stod(cells[3]), std::stod(cells[4])};
        r.raw = {std::stod(cells[5]), std::stod(cells[6])};
        r.calibrated = {std::stod(cells[7]), std::stod(cells[8])};
        r.filtered = {std::stod(cells[9]), std::stod(cells[10])};
        r.predicted_point = {std::stod(cells[11]), std::stod(cells[12])};
        r.error_deg = std::stod(cells[13]);
        r.error_mm = std::stod(cells[14]);
        if (cells.size() > 15) r.error = cells[15];
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace gaze
