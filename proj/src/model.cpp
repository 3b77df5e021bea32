#include "lpvmpc/model.hpp"

#include "json.hpp"

#include <fstream>

namespace lpvmpc {

using nlohmann::json;

IoNorm IoNorm::identity(Index nu, Index ny) {
  return IoNorm{Vector::Zero(nu), Vector::Ones(nu), Vector::Zero(ny), Vector::Ones(ny)};
}

Vector IoNorm::normalize_u(const Vector& u) const { return (u - u_mean).cwiseQuotient(u_scale); }
Vector IoNorm::normalize_y(const Vector& y) const { return (y - y_mean).cwiseQuotient(y_scale); }
Vector IoNorm::denormalize_y(const Vector& y) const { return y_mean + y.cwiseProduct(y_scale); }

AnnSsModel::AnnSsModel(Mlp f_net, Mlp h_net, std::optional<Mlp> encoder_net, ModelDims dims,
                       std::optional<IoNorm> io_norm)
    : f_net_(std::move(f_net)),
      h_net_(std::move(h_net)),
      encoder_net_(std::move(encoder_net)),
      dims_(dims),
      io_norm_(io_norm ? *io_norm : IoNorm::identity(dims.nu, dims.ny)) {
  if (dims_.nx <= 0 || dims_.nu <= 0 || dims_.ny <= 0) throw ArgumentError("model dimensions must be positive");
  if (dims_.na < 0 || dims_.nb < 0) throw ArgumentError("lag counts must be nonnegative");
  if (f_net_.input_width() != dims_.nx + dims_.nu || f_net_.output_width() != dims_.nx)
    throw ArgumentError("f_net must map nx+nu -> nx");
  if (h_net_.input_width() != dims_.nx || h_net_.output_width() != dims_.ny)
    throw ArgumentError("h_net must map nx -> ny");
  if (encoder_net_ && (encoder_net_->input_width() != dims_.encoder_width() || encoder_net_->output_width() != dims_.nx))
    throw ArgumentError("encoder_net must map na*ny + nb*nu + ny -> nx");
  const IoNorm& n = io_norm_;
  if (n.u_mean.size() != dims_.nu || n.u_scale.size() != dims_.nu || n.y_mean.size() != dims_.ny ||
      n.y_scale.size() != dims_.ny)
    throw ArgumentError("io_norm dimensions do not match nu/ny");
  if ((n.u_scale.array() <= 0.0).any() || (n.y_scale.array() <= 0.0).any())
    throw ArgumentError("io_norm scales must be strictly positive");
}

void AnnSsModel::check_x(const Vector& x) const {
  if (x.size() != dims_.nx) throw ArgumentError("state has wrong dimension");
}

void AnnSsModel::check_u(const Vector& u) const {
  if (u.size() != dims_.nu) throw ArgumentError("input has wrong dimension");
}

Vector AnnSsModel::f_eval(const Vector& x, const Vector& u) const {
  check_x(x);
  check_u(u);
  Vector z(dims_.nx + dims_.nu);
  z << x, io_norm_.normalize_u(u);
  return f_net_.forward(z);
}

Vector AnnSsModel::h_eval(const Vector& x) const {
  check_x(x);
  return io_norm_.denormalize_y(h_net_.forward(x));
}

Matrix AnnSsModel::f_jacobian(const Vector& x, const Vector& u) const {
  check_x(x);
  check_u(u);
  Vector z(dims_.nx + dims_.nu);
  z << x, io_norm_.normalize_u(u);
  Matrix jac = f_net_.jacobian(z);
  jac.rightCols(dims_.nu) *= io_norm_.u_scale.cwiseInverse().asDiagonal();
  return jac;
}

Matrix AnnSsModel::h_jacobian(const Vector& x) const {
  check_x(x);
  return io_norm_.y_scale.asDiagonal() * h_net_.jacobian(x);
}

Vector AnnSsModel::encoder_input(const IoWindow& window) const {
  const Index n = dims_.window();
  if (window.inputs.rows() != dims_.nu || window.inputs.cols() != n || window.outputs.rows() != dims_.ny ||
      window.outputs.cols() != n + 1)
    throw ArgumentError("IoWindow dimensions do not match the model lag counts");
  Vector z(dims_.encoder_width());
  Index k = 0;
  for (Index c = n - dims_.nb; c < n; ++c) {
    z.segment(k, dims_.nu) = io_norm_.normalize_u(window.inputs.col(c));
    k += dims_.nu;
  }
  for (Index c = n - dims_.na; c <= n; ++c) {
    z.segment(k, dims_.ny) = io_norm_.normalize_y(window.outputs.col(c));
    k += dims_.ny;
  }
  return z;
}

Vector AnnSsModel::encode_state(const IoWindow& window) const {
  if (!encoder_net_) throw ConfigError("model has no encoder network");
  return encoder_net_->forward(encoder_input(window));
}

Mlp lti_encoder(const Matrix& A, const Matrix& B, const Matrix& C, Index n) {
  const Index nx = A.rows(), nu = B.cols(), ny = C.rows();
  require(n >= 1, "lti_encoder: window must be at least 1");
  // Stacked outputs over the window: Y = O x_{k-n} + T U.
  Matrix O(ny * (n + 1), nx);
  Matrix T = Matrix::Zero(ny * (n + 1), nu * n);
  Matrix Ai = Matrix::Identity(nx, nx);
  for (Index i = 0; i <= n; ++i) {
    O.middleRows(i * ny, ny) = C * Ai;
    Ai = A * Ai;
  }
  for (Index i = 1; i <= n; ++i) {
    Matrix Ap = Matrix::Identity(nx, nx);
    for (Index j = i - 1; j >= 0; --j) {
      T.block(i * ny, j * nu, ny, nu) = C * Ap * B;
      Ap = A * Ap;
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(O);
  if (cod.rank() < nx) throw ArgumentError("lti_encoder: system is not observable over the window");
  const Matrix O_pinv = cod.pseudoInverse();
  // x_k = A^n x_{k-n} + R U.
  Matrix An = Matrix::Identity(nx, nx);
  for (Index i = 0; i < n; ++i) An = A * An;
  Matrix R(nx, nu * n);
  Matrix Ap = Matrix::Identity(nx, nx);
  for (Index j = n - 1; j >= 0; --j) {
    R.middleCols(j * nu, nu) = Ap * B;
    Ap = A * Ap;
  }
  Matrix W(nx, nu * n + ny * (n + 1));
  W.leftCols(nu * n) = R - An * O_pinv * T;
  W.rightCols(ny * (n + 1)) = An * O_pinv;
  return Mlp::linear(W, Vector::Zero(nx));
}

AnnSsModel make_lti_model(const Matrix& A, const Matrix& B, const Matrix& C, Index na, Index nb) {
  require(A.rows() == A.cols() && B.rows() == A.rows() && C.cols() == A.cols(), "make_lti_model: inconsistent dims");
  Matrix AB(A.rows(), A.cols() + B.cols());
  AB << A, B;
  ModelDims dims{A.rows(), B.cols(), C.rows(), na, nb};
  std::optional<Mlp> encoder;
  if (na == nb && na >= 1) encoder = lti_encoder(A, B, C, na);
  return AnnSsModel(Mlp::linear(AB, Vector::Zero(A.rows())), Mlp::linear(C, Vector::Zero(C.rows())), encoder,
                    dims);
}

namespace {

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(std::string(what) + " must contain numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

json mlp_to_json(const Mlp& net) {
  json layers = json::array();
  for (const Layer& layer : net.layers()) {
    std::vector<double> weights;
    weights.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Index r = 0; r < layer.weights.rows(); ++r)
      for (Index c = 0; c < layer.weights.cols(); ++c) weights.push_back(layer.weights(r, c));
    layers.push_back({{"weights", weights}, {"bias", vector_to_json(layer.bias)}, {"activation", to_string(layer.activation)}});
  }
  return layers;
}

Mlp mlp_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw SchemaError("network must be a non-empty list of layers");
  std::vector<Layer> layers;
  for (const json& jl : j) {
    Layer layer;
    layer.bias = vector_from_json(field(jl, "bias"), "bias");
    const Vector flat = vector_from_json(field(jl, "weights"), "weights");
    const Index rows = layer.bias.size();
    if (rows == 0 || flat.size() % rows != 0) throw SchemaError("weights length is not a multiple of bias length");
    const Index cols = flat.size() / rows;
    layer.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), rows, cols);
    layer.activation = activation_from_string(field(jl, "activation").get<std::string>());
    layers.push_back(std::move(layer));
  }
  try {
    return Mlp(std::move(layers));
  } catch (const ArgumentError& e) {
    throw SchemaError(std::string("invalid network: ") + e.what());
  }
}

json model_to_json(const AnnSsModel& model) {
  const ModelDims& d = model.dims();
  const IoNorm& n = model.io_norm();
  json j;
  j["version"] = kModelSchemaVersion;
  j["nx"] = d.nx;
  j["nu"] = d.nu;
  j["ny"] = d.ny;
  j["na"] = d.na;
  j["nb"] = d.nb;
  j["io_norm"] = {{"u_mean", vector_to_json(n.u_mean)},
                  {"u_scale", vector_to_json(n.u_scale)},
                  {"y_mean", vector_to_json(n.y_mean)},
                  {"y_scale", vector_to_json(n.y_scale)}};
  j["f_net"] = mlp_to_json(model.f_net());
  j["h_net"] = mlp_to_json(model.h_net());
  j["encoder_net"] = model.encoder_net() ? mlp_to_json(*model.encoder_net()) : json(nullptr);
  return j;
}

AnnSsModel model_from_json(const json& j) {
  const json& version = field(j, "version");
  if (!version.is_number_integer() || version.get<int>() != kModelSchemaVersion)
    throw SchemaError("unsupported model schema version");
  ModelDims dims;
  try {
    dims.nx = field(j, "nx").get<Index>();
    dims.nu = field(j, "nu").get<Index>();
    dims.ny = field(j, "ny").get<Index>();
    dims.na = field(j, "na").get<Index>();
    dims.nb = field(j, "nb").get<Index>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad model dimensions: ") + e.what());
  }
  std::optional<IoNorm> io_norm;
  if (j.contains("io_norm") && !j.at("io_norm").is_null()) {
    const json& jn = j.at("io_norm");
    io_norm = IoNorm{vector_from_json(field(jn, "u_mean"), "u_mean"), vector_from_json(field(jn, "u_scale"), "u_scale"),
                     vector_from_json(field(jn, "y_mean"), "y_mean"), vector_from_json(field(jn, "y_scale"), "y_scale")};
  }
  std::optional<Mlp> encoder;
  if (j.contains("encoder_net") && !j.at("encoder_net").is_null()) encoder = mlp_from_json(j.at("encoder_net"));
  try {
    return AnnSsModel(mlp_from_json(field(j, "f_net")), mlp_from_json(field(j, "h_net")), std::move(encoder), dims,
                      io_norm);
  } catch (const ArgumentError& e) {
    throw SchemaError(std::string("inconsistent model: ") + e.what());
  }
}

void save_model(const AnnSsModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump() << '\n';
}

AnnSsModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError("malformed model file " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace lpvmpc
