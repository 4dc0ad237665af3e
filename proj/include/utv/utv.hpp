#pragma once

#include "utv/image.hpp"
#include "utv/io.hpp"
#include "utv/metrics.hpp"
#include "utv/noise_estimate.hpp"
#include "utv/restoration.hpp"
#include "utv/tv_admm.hpp"
