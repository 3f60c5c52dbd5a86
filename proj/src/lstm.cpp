#include "secs/lstm.hpp"

#include "secs/error.hpp"

#include <string>

namespace secs {
namespace {

constexpr const char* kModule = "neuralcore";

template <typename Scalar>
LstmStep<Scalar> activate(MatrixX<Scalar>&& z, const MatrixX<Scalar>* c_prev, int hidden) {
  const Eigen::Index H = hidden;
  LstmStep<Scalar> s;
  s.gates = std::move(z);
  s.gates.topRows(2 * H) = s.gates.topRows(2 * H).array().logistic();
  s.gates.middleRows(2 * H, H) = s.gates.middleRows(2 * H, H).array().tanh();
  s.gates.bottomRows(H) = s.gates.bottomRows(H).array().logistic();
  const auto i = s.gates.topRows(H).array();
  const auto f = s.gates.middleRows(H, H).array();
  const auto g = s.gates.middleRows(2 * H, H).array();
  const auto o = s.gates.bottomRows(H).array();
  if (c_prev)
    s.c = (f * c_prev->array() + i * g).matrix();
  else
    s.c = (i * g).matrix();
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = (o * s.tanh_c.array()).matrix();
  return s;
}

template <typename Scalar>
void check_input(const MatrixX<Scalar>& x, const LstmParams<Scalar>& p) {
  if (x.rows() != p.input_dim())
    throw ShapeError(kModule, "LSTM input has " + std::to_string(x.rows()) +
                                  " rows, expected " + std::to_string(p.input_dim()));
  if (!x.allFinite())
    throw NumericError(kModule, "non-finite LSTM input");
}

} // namespace

template <typename Scalar>
LstmParams<Scalar> LstmParams<Scalar>::zeros(int input_dim, int hidden_dim) {
  return {MatrixX<Scalar>::Zero(4 * hidden_dim, input_dim),
          MatrixX<Scalar>::Zero(4 * hidden_dim, hidden_dim),
          MatrixX<Scalar>::Zero(4 * hidden_dim, 1)};
}

template <typename Scalar>
void LstmParams<Scalar>::validate() const {
  const Eigen::Index H = U.cols();
  if (H < 1 || U.rows() != 4 * H || W.rows() != 4 * H || b.rows() != 4 * H || b.cols() != 1)
    throw ShapeError(kModule, "inconsistent LSTM parameter shapes");
  if (!W.allFinite() || !U.allFinite() || !b.allFinite())
    throw NumericError(kModule, "non-finite LSTM parameters");
}

template <typename Scalar>
LstmStep<Scalar> lstm_cell_step(const MatrixX<Scalar>& x, const MatrixX<Scalar>& h_prev,
                                const MatrixX<Scalar>& c_prev, const LstmParams<Scalar>& p) {
  check_input(x, p);
  const int H = p.hidden_dim();
  if (h_prev.rows() != H || c_prev.rows() != H || h_prev.cols() != x.cols() ||
      c_prev.cols() != x.cols())
    throw ShapeError(kModule, "LSTM state shape does not match hidden size " + std::to_string(H));
  if (!h_prev.allFinite() || !c_prev.allFinite())
    throw NumericError(kModule, "non-finite LSTM state");
  MatrixX<Scalar> z(4 * H, x.cols());
  z.noalias() = p.W * x;
  z.noalias() += p.U * h_prev;
  z.colwise() += p.b.col(0);
  return activate<Scalar>(std::move(z), &c_prev, H);
}

template <typename Scalar>
LstmStep<Scalar> lstm_cell_first_step(const MatrixX<Scalar>& x, const LstmParams<Scalar>& p) {
  check_input(x, p);
  const int H = p.hidden_dim();
  MatrixX<Scalar> z(4 * H, x.cols());
  z.noalias() = p.W * x;
  z.colwise() += p.b.col(0);
  return activate<Scalar>(std::move(z), nullptr, H);
}

template <typename Scalar>
LstmStepGrad<Scalar> lstm_cell_backward(const LstmParams<Scalar>& p, const MatrixX<Scalar>& x,
                                        const MatrixX<Scalar>& h_prev,
                                        const MatrixX<Scalar>& c_prev, const LstmStep<Scalar>& step,
                                        const MatrixX<Scalar>& dh, const MatrixX<Scalar>& dc,
                                        bool want_dx, LstmParams<Scalar>& grad) {
  const Eigen::Index H = p.hidden_dim();
  const Eigen::Index N = x.cols();
  const auto i = step.gates.topRows(H).array();
  const auto f = step.gates.middleRows(H, H).array();
  const auto g = step.gates.middleRows(2 * H, H).array();
  const auto o = step.gates.bottomRows(H).array();
  const auto tc = step.tanh_c.array();

  MatrixX<Scalar> dc_total = dh.array() * o * (Scalar(1) - tc.square());
  if (dc.size() != 0)
    dc_total += dc;

  MatrixX<Scalar> dz(4 * H, N);
  dz.topRows(H) = dc_total.array() * g * i * (Scalar(1) - i);
  if (c_prev.size() != 0)
    dz.middleRows(H, H) = dc_total.array() * c_prev.array() * f * (Scalar(1) - f);
  else
    dz.middleRows(H, H).setZero();
  dz.middleRows(2 * H, H) = dc_total.array() * i * (Scalar(1) - g.square());
  dz.bottomRows(H) = dh.array() * tc * o * (Scalar(1) - o);

  grad.W.noalias() += dz * x.transpose();
  grad.b += dz.rowwise().sum();

  LstmStepGrad<Scalar> out;
  if (h_prev.size() != 0) {
    grad.U.noalias() += dz * h_prev.transpose();
    out.dh_prev.noalias() = p.U.transpose() * dz;
    out.dc_prev = (dc_total.array() * f).matrix();
  }
  if (want_dx)
    out.dx.noalias() = p.W.transpose() * dz;
  return out;
}

#define SECS_INSTANTIATE_LSTM(T)                                                              \
  template struct LstmParams<T>;                                                              \
  template LstmStep<T> lstm_cell_step<T>(const MatrixX<T>&, const MatrixX<T>&,                \
                                         const MatrixX<T>&, const LstmParams<T>&);            \
  template LstmStep<T> lstm_cell_first_step<T>(const MatrixX<T>&, const LstmParams<T>&);      \
  template LstmStepGrad<T> lstm_cell_backward<T>(                                             \
      const LstmParams<T>&, const MatrixX<T>&, const MatrixX<T>&, const MatrixX<T>&,          \
      const LstmStep<T>&, const MatrixX<T>&, const MatrixX<T>&, bool, LstmParams<T>&);

SECS_INSTANTIATE_LSTM(float)
SECS_INSTANTIATE_LSTM(double)

#undef SECS_INSTANTIATE_LSTM

} // namespace secs
