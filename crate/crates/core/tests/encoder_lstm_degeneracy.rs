//! With zero encoder layers the Encoder-LSTM cell must coincide with an
//! ordinary LSTM applied token by token to `[Z; H_{t-1}]`.

mod support;

#[test]
fn zero_layer_cell_matches_plain_lstm_on_100_draws() {
    let worst = support::degeneracy_max_deviation(100);
    assert!(worst <= 1e-12, "max deviation {worst:e}");
}
