#include "mwgs/scene.hpp"

#include "mwgs/io.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace mwgs {

using nlohmann::json;

void Anchor::validate() const {
    const auto k = offsets.rows();
    if (k < 1) throw InvalidParameter("anchor: k must be >= 1");
    if (opacity_logits.size() != k || rotations.rows() != k || log_scales.rows() != k)
        throw InvalidParameter("anchor: per-gaussian field sizes disagree");
    if (offsets.cols() != 3 || rotations.cols() != 4 || log_scales.cols() != 3)
        throw InvalidParameter("anchor: bad column counts");
    if (nc.rows() != bc.rows() || nc.cols() != 2 || bc.cols() != 2)
        throw InvalidParameter("anchor: jitter parameter shapes disagree");
    if (omega_narrow.size() != omega_broad.size())
        throw InvalidParameter("anchor: stage weight sizes disagree");
    if (!position.allFinite() || !log_scaling.allFinite() || !offsets.allFinite() ||
        !opacity_logits.allFinite() || !rotations.allFinite() || !log_scales.allFinite() ||
        !f_v.allFinite() || !nc.allFinite() || !bc.allFinite() || !omega_narrow.allFinite() ||
        !omega_broad.allFinite())
        throw InvalidParameter("anchor: non-finite fields");
}

AnchorGeomGrad AnchorGeomGrad::zeros_like(const Anchor& a) {
    AnchorGeomGrad g;
    g.offsets = MatX::Zero(a.offsets.rows(), 3);
    g.opacity_logits = VecX::Zero(a.opacity_logits.size());
    g.rotations = MatX::Zero(a.rotations.rows(), 4);
    g.log_scales = MatX::Zero(a.log_scales.rows(), 3);
    return g;
}

Mat3 build_covariance(const Vec4& q, const Vec3& s) {
    if (!q.allFinite() || !s.allFinite()) throw InvalidParameter("build_covariance: non-finite input");
    if (!(s.minCoeff() > 0.0)) throw InvalidParameter("build_covariance: scales must be positive");
    const Mat3 R = quat_to_rotation(q);
    return R * s.cwiseAbs2().asDiagonal() * R.transpose();
}

CovarianceGrad build_covariance_backward(const Vec4& q, const Vec3& s, const Mat3& grad_sigma) {
    const Mat3 R = quat_to_rotation(q);
    const Mat3 D = s.cwiseAbs2().asDiagonal();
    // Sigma = R D R^T: dL/dR = (G + G^T) R D, dL/dD = R^T G R.
    const Mat3 grad_R = (grad_sigma + grad_sigma.transpose()) * R * D;
    const Mat3 RtGR = R.transpose() * grad_sigma * R;
    CovarianceGrad out;
    out.q = quat_rotation_backward(q, grad_R);
    for (int i = 0; i < 3; ++i) out.s[i] = 2.0 * s[i] * RtGR(i, i);
    return out;
}

std::vector<GaussianPrimitive> expand_anchor(const Anchor& a) {
    a.validate();
    const Vec3 l_v = a.log_scaling.array().exp();
    const int k = a.gaussian_count();
    std::vector<GaussianPrimitive> out(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        auto& g = out[static_cast<std::size_t>(j)];
        g.mean = a.position + a.offsets.row(j).transpose().cwiseProduct(l_v);
        const Vec3 s = a.log_scales.row(j).transpose().array().exp();
        g.covariance = build_covariance(a.rotations.row(j).transpose(), s);
        g.opacity = sigmoid(a.opacity_logits[j]);
        g.color.setZero();
    }
    return out;
}

void expand_anchor_backward(const Anchor& a, const std::vector<GaussianGrad>& grads, AnchorGeomGrad& out) {
    const int k = a.gaussian_count();
    if (static_cast<int>(grads.size()) != k) throw InvalidShape("expand_anchor_backward: grad count mismatch");
    const Vec3 l_v = a.log_scaling.array().exp();
    for (int j = 0; j < k; ++j) {
        const auto& g = grads[static_cast<std::size_t>(j)];
        // mean = position + offset .* l_v with l_v = exp(log_scaling)
        out.position += g.mean;
        const Vec3 off = a.offsets.row(j).transpose();
        out.offsets.row(j) += g.mean.cwiseProduct(l_v).transpose();
        out.log_scaling += g.mean.cwiseProduct(off).cwiseProduct(l_v);
        // covariance
        const Vec3 s = a.log_scales.row(j).transpose().array().exp();
        const CovarianceGrad cg = build_covariance_backward(a.rotations.row(j).transpose(), s, g.covariance);
        out.rotations.row(j) += cg.q.transpose();
        out.log_scales.row(j) += cg.s.cwiseProduct(s).transpose();
        // opacity = sigmoid(logit)
        const double alpha = sigmoid(a.opacity_logits[j]);
        out.opacity_logits[j] += g.opacity * alpha * (1.0 - alpha);
    }
}

double eval_gaussian(const GaussianPrimitive& g, const Vec3& x) {
    Eigen::LDLT<Mat3> ldlt(g.covariance);
    if (ldlt.info() != Eigen::Success || !(g.covariance.determinant() > 0.0))
        throw NumericalDegeneracy("eval_gaussian: covariance not invertible");
    const Vec3 d = x - g.mean;
    return std::exp(-0.5 * d.dot(ldlt.solve(d)));
}

namespace {

json vec_to_json(const VecX& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json mat_to_json(const MatX& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

VecX vec_from_json(const json& a) {
    VecX v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

MatX mat_from_json(const json& rows, Eigen::Index cols) {
    MatX m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (static_cast<Eigen::Index>(row.size()) != cols) throw IoError("scene: ragged matrix row");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

}  // namespace

void save_scene(const std::string& path, const SceneFile& scene) {
    json root;
    root["config"] = json::parse(scene.config_json);
    json cams = json::array();
    for (const auto& c : scene.cameras) {
        cams.push_back({{"width", c.width},
                        {"height", c.height},
                        {"fx", c.fx},
                        {"fy", c.fy},
                        {"cx", c.cx},
                        {"cy", c.cy},
                        {"orientation", {c.orientation[0], c.orientation[1], c.orientation[2], c.orientation[3]}},
                        {"position", {c.position[0], c.position[1], c.position[2]}}});
    }
    root["cameras"] = std::move(cams);
    json anchors = json::array();
    for (const auto& a : scene.anchors) {
        anchors.push_back({{"position", {a.position[0], a.position[1], a.position[2]}},
                           {"log_scaling", {a.log_scaling[0], a.log_scaling[1], a.log_scaling[2]}},
                           {"offsets", mat_to_json(a.offsets)},
                           {"opacity_logits", vec_to_json(a.opacity_logits)},
                           {"rotations", mat_to_json(a.rotations)},
                           {"log_scales", mat_to_json(a.log_scales)},
                           {"f_v", vec_to_json(a.f_v)},
                           {"nc", mat_to_json(a.nc)},
                           {"bc", mat_to_json(a.bc)},
                           {"omega_narrow", vec_to_json(a.omega_narrow)},
                           {"omega_broad", vec_to_json(a.omega_broad)}});
    }
    root["anchors"] = std::move(anchors);
    write_text_file(path, root.dump(2) + "\n");
}

SceneFile load_scene(const std::string& path) {
    const json root = json::parse(read_text_file(path));
    SceneFile scene;
    scene.config_json = root.value("config", json::object()).dump();
    for (const auto& jc : root.at("cameras")) {
        Camera c;
        c.width = jc.at("width").get<int>();
        c.height = jc.at("height").get<int>();
        c.fx = jc.at("fx").get<double>();
        c.fy = jc.at("fy").get<double>();
        c.cx = jc.at("cx").get<double>();
        c.cy = jc.at("cy").get<double>();
        const auto& o = jc.at("orientation");
        c.orientation = Vec4(o[0].get<double>(), o[1].get<double>(), o[2].get<double>(), o[3].get<double>());
        const auto& p = jc.at("position");
        c.position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        c.validate();
        scene.cameras.push_back(c);
    }
    for (const auto& ja : root.at("anchors")) {
        Anchor a;
        const auto& p = ja.at("position");
        a.position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        const auto& ls = ja.at("log_scaling");
        a.log_scaling = Vec3(ls[0].get<double>(), ls[1].get<double>(), ls[2].get<double>());
        a.offsets = mat_from_json(ja.at("offsets"), 3);
        a.opacity_logits = vec_from_json(ja.at("opacity_logits"));
        a.rotations = mat_from_json(ja.at("rotations"), 4);
        a.log_scales = mat_from_json(ja.at("log_scales"), 3);
        a.f_v = vec_from_json(ja.at("f_v"));
        a.nc = mat_from_json(ja.at("nc"), 2);
        a.bc = mat_from_json(ja.at("bc"), 2);
        a.omega_narrow = vec_from_json(ja.at("omega_narrow"));
        a.omega_broad = vec_from_json(ja.at("omega_broad"));
        a.validate();
        scene.anchors.push_back(std::move(a));
    }
    return scene;
}

}  // namespace mwgs
