// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nss/archive.hpp"
#include "nss/composition.hpp"
#include "nss/csv.hpp"
#include "nss/data.hpp"
#include "nss/errors.hpp"
#include "nss/evaluation.hpp"
#include "nss/head.hpp"
#include "nss/neural.hpp"
#include "nss/normal.hpp"
#include "nss/normalization.hpp"
#include "nss/plan.hpp"
#include "nss/random.hpp"
#include "nss/search.hpp"
#include "nss/series.hpp"
#include "nss/spline.hpp"
#include "nss/training.hpp"
