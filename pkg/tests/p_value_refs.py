# Two-sided Student-t tail probabilities 2*P(T_df > |t|), computed once by
# 50-digit quadrature of the t density (mpmath) and frozen here.
T_PVALUE_REFS = (
    (0.0, 1, 1.0),
    (0.5, 1, 0.70483276469913345165),
    (1.0, 2, 0.42264973081037423549),
    (1.0606601717798212, 2, 0.40000000000000003404),
    (2.0, 2, 0.18350341907227396727),
    (0.3, 3, 0.78376329203991904229),
    (1.5, 3, 0.23058386524482305228),
    (3.182446305284263, 3, 0.049999999999978760849),
    (0.1, 5, 0.92423014115466037028),
    (2.0, 5, 0.10193947882985835625),
    (4.0, 5, 0.010323415480831453804),
    (1.0, 10, 0.34089313230205987267),
    (2.228138851986274, 10, 0.050000000000000069608),
    (3.5, 10, 0.005726505429885215859),
    (0.75, 25, 0.46025521198130750355),
    (2.5, 25, 0.019343127569942697446),
    (1.96, 100, 0.052778901366229666043),
    (5.0, 100, 2.450173413503800423e-6),
    (8.0, 30, 6.2658224757007589434e-9),
    (12.0, 7, 6.3583103781851002706e-6),
)
