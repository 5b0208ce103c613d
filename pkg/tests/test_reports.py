from fractions import Fraction as F

from imdyn.distortion import empirical_distortion
from imdyn.expansion_certifier import ExpansionRefusal, expansion_n, kn_table
from imdyn.fixtures import steep_shallow, tent
from imdyn.map_model import classify
from imdyn.orbit_engine import periodic_orbits
from imdyn.reports import (class_report, distortion_csv, expansion_report, format_word, kn_csv, orbits_csv,
                           to_key_values)


class TestFormatting:
    """Test the shared value formatting."""

    def test_format_word(self):
        assert format_word((0, 1, 1)) == '0-1-1'
        assert format_word(None) == ''

    def test_key_values(self):
        assert to_key_values([('a', True), ('b', None), ('c', F(3, 4)), ('d', 0.5)]) == 'a=yes\nb=\nc=3/4\nd=0.5\n'


class TestRenderers:
    """Test the report renderers."""

    def test_orbits_csv(self):
        csv = orbits_csv(periodic_orbits(tent(), 2))
        assert csv == ('period,word,point_0,point_1,multiplier_left,multiplier_right,class\n'
                       '2,0-1,2/5,4/5,-4,-4,repelling\n')

    def test_orbits_csv_pads_short_orbits(self):
        csv = orbits_csv(periodic_orbits(tent(), 1) + periodic_orbits(tent(), 2))
        assert csv.splitlines() == ['period,word,point_0,point_1,multiplier_left,multiplier_right,class',
                                    '1,0,0,,2,2,repelling',
                                    '1,1,2/3,,-2,-2,repelling',
                                    '2,0-1,2/5,4/5,-4,-4,repelling'], "Period-1 rows leave point_1 empty"

    def test_kn_csv(self):
        assert kn_csv(kn_table(tent(), 2)) == 'n,K_n,orbit_count,attaining_word\n1,2,2,0\n2,4,1,0-1\n'

    def test_expansion_certificate(self):
        assert expansion_report(expansion_n(tent())) == 'N=1\nmin_expansion=2\nwitness_word=0\n'

    def test_expansion_refusal(self):
        report = expansion_report(ExpansionRefusal(3, F(1, 8), (0, 0, 0)))
        assert report.startswith('refused=yes\nn_limit=3\nmin_expansion=1/8\nwitness_word=0-0-0\n')

    def test_distortion_csv(self):
        report = empirical_distortion(steep_shallow(), (F(1, 5), F(4, 5)), 1)
        csv = distortion_csv([('steep', report)])
        assert csv.splitlines()[1] == 'steep,1/5,4/5,1,2,1,4,,yes', "A missing bound is left empty"

    def test_class_report(self):
        report = class_report(classify(steep_shallow()))
        assert 'class_E=no\n' in report
        assert 'L=1\n' in report
        assert 'min_abs_deriv=3/2\n' in report
