#pragma once

#include "atbilstm/date.hpp"
#include "atbilstm/error.hpp"
#include "atbilstm/garch.hpp"
#include "atbilstm/indicators.hpp"
#include "atbilstm/metrics.hpp"
#include "atbilstm/nn/checkpoint.hpp"
#include "atbilstm/nn/layers.hpp"
#include "atbilstm/nn/lstm.hpp"
#include "atbilstm/nn/network.hpp"
#include "atbilstm/nn/rmsprop.hpp"
#include "atbilstm/nn/tensor.hpp"
#include "atbilstm/pipeline.hpp"
#include "atbilstm/timeseries_io.hpp"
