"""Shared fixture data for the test suite."""

# Relevance scores of one 100-candidate query from a softmax reranker run
# entirely in bfloat16: long runs of identical values near 1.0 where the
# 7-bit mantissa grid is coarsest.  Values are printed to 8 decimals, so
# entries below 0.5 are display-rounded off the exact grid.
SATURATED_BF16_SCORES = [
    1.00000000, 1.00000000, 1.00000000, 1.00000000, 1.00000000,
    1.00000000, 1.00000000, 1.00000000, 1.00000000, 1.00000000,
    0.99609375, 0.99609375, 0.99609375, 0.99609375, 0.99609375,
    0.99609375, 0.99609375, 0.99609375, 0.99609375, 0.99609375,
    0.99609375, 0.99609375, 0.99609375, 0.99609375, 0.99609375,
    0.99609375, 0.99609375, 0.99609375, 0.99609375,
    0.99218750, 0.99218750, 0.99218750, 0.99218750, 0.99218750,
    0.99218750, 0.99218750, 0.99218750, 0.99218750, 0.99218750,
    0.99218750, 0.99218750, 0.99218750,
    0.98828125, 0.98828125, 0.98828125, 0.98828125, 0.98828125,
    0.98828125, 0.98828125,
    0.98437500, 0.98437500,
    0.98046875,
    0.97656250, 0.97656250,
    0.97265625,
    0.96875000, 0.96875000, 0.96875000, 0.96875000, 0.96875000, 0.96875000,
    0.96093750, 0.96093750, 0.96093750, 0.96093750,
    0.95703125, 0.95703125, 0.95703125, 0.95703125, 0.95703125,
    0.95312500, 0.95312500,
    0.94921875, 0.94921875,
    0.94531250, 0.94531250, 0.94531250,
    0.94140625, 0.94140625,
    0.93359375,
    0.92578125, 0.92578125,
    0.91796875,
    0.91406250,
    0.88671875, 0.88671875,
    0.87890625, 0.87890625,
    0.87500000,
    0.86718750,
    0.77734375,
    0.60937500,
    0.51562500,
    0.46875000,
    0.34960938,
    0.30664062,
    0.28125000,
    0.17285156,
    0.08496094,
    0.02441406,
]

# Sizes of the leading tie groups in the list above.
SATURATED_LEADING_GROUP_SIZES = [10, 19, 13, 7]
