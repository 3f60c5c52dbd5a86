#ifndef SECS_LSTM_HPP
#define SECS_LSTM_HPP

#include <Eigen/Core>

namespace secs {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Gate rows are stacked in the fixed order [input, forget, candidate, output],
/// each block `hidden_dim` rows tall.
template <typename Scalar>
struct LstmParams {
  MatrixX<Scalar> W; ///< 4H x input_dim
  MatrixX<Scalar> U; ///< 4H x H
  MatrixX<Scalar> b; ///< 4H x 1

  int input_dim() const { return static_cast<int>(W.cols()); }
  int hidden_dim() const { return static_cast<int>(U.cols()); }

  static LstmParams zeros(int input_dim, int hidden_dim);
  /// ShapeError on inconsistent shapes, NumericError on non-finite entries.
  void validate() const;

  template <typename Other>
  LstmParams<Other> cast() const {
    return {W.template cast<Other>(), U.template cast<Other>(), b.template cast<Other>()};
  }
};

/// One recurrent step for a block of N independent columns.
template <typename Scalar>
struct LstmStep {
  MatrixX<Scalar> h;      ///< H x N
  MatrixX<Scalar> c;      ///< H x N
  MatrixX<Scalar> gates;  ///< 4H x N, post-activation [i, f, g, o]
  MatrixX<Scalar> tanh_c; ///< H x N
};

/// i, f, o = sigmoid; g = tanh; c = f*c_prev + i*g; h = o*tanh(c).
/// `x` is input_dim x N; the states are H x N. Throws ShapeError on mismatched
/// shapes and NumericError on non-finite input.
template <typename Scalar>
LstmStep<Scalar> lstm_cell_step(const MatrixX<Scalar>& x, const MatrixX<Scalar>& h_prev,
                                const MatrixX<Scalar>& c_prev, const LstmParams<Scalar>& p);

/// Same as lstm_cell_step with zero incoming state.
template <typename Scalar>
LstmStep<Scalar> lstm_cell_first_step(const MatrixX<Scalar>& x, const LstmParams<Scalar>& p);

template <typename Scalar>
struct LstmStepGrad {
  MatrixX<Scalar> dh_prev; ///< empty when the step had zero incoming state
  MatrixX<Scalar> dc_prev;
  MatrixX<Scalar> dx;      ///< empty unless requested
};

/// Backpropagates through one step, accumulating parameter gradients into
/// `grad`. `h_prev`/`c_prev` may be empty to denote zero incoming state.
template <typename Scalar>
LstmStepGrad<Scalar> lstm_cell_backward(const LstmParams<Scalar>& p, const MatrixX<Scalar>& x,
                                        const MatrixX<Scalar>& h_prev,
                                        const MatrixX<Scalar>& c_prev, const LstmStep<Scalar>& step,
                                        const MatrixX<Scalar>& dh, const MatrixX<Scalar>& dc,
                                        bool want_dx, LstmParams<Scalar>& grad);

} // namespace secs

#endif // SECS_LSTM_HPP
