"""Tail-risk forecasting and backtesting for futures return series."""

from .series import (PriceSeries, ReturnSeries, StatsSummary, SeriesError,
                     load_price_series, compute_returns, descriptive_stats,
                     split_sample, ljung_box)
from .garch import (GarchParams, FittedModel, CondMoments, GarchError,
                    negative_log_likelihood, fit, filter_series,
                    forecast_one_step, var_closed_form, es_closed_form,
                    simulate)
from .empirical import (QrDesign, QrFit, EmpiricalError, hs_var, ewqr_var,
                        build_vol_regressors, qr_fit, qr_predict,
                        weighted_quantile)
from .es_integral import es_discretized, es_nodes, tail_side
from .backtests import (HitSequence, TestResult, DeviationRecord,
                        BacktestError, hit_sequence, bin_test, pof_test,
                        cci_test, dq_test, fisher_combine, un_test,
                        un_statistic, simulate_critical_value,
                        consistency_check, deviation_record)
from .tails import (TailIndexResult, TailIndexError, garch_tail_index,
                    empirical_tail_index, tail_comparison)

__version__ = "0.1.0"
