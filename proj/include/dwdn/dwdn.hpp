#pragma once

#include "dwdn/error.hpp"
#include "dwdn/image.hpp"
#include "dwdn/fft.hpp"
#include "dwdn/convolve.hpp"
#include "dwdn/resample.hpp"
#include "dwdn/metrics.hpp"
#include "dwdn/io.hpp"
#include "dwdn/blur_sim.hpp"
#include "dwdn/autodiff.hpp"
#include "dwdn/nn.hpp"
#include "dwdn/weights.hpp"
#include "dwdn/filter_bank.hpp"
#include "dwdn/wiener.hpp"
#include "dwdn/refine.hpp"
#include "dwdn/train.hpp"
#include "dwdn/experiments.hpp"
#include "dwdn/cli_config.hpp"
