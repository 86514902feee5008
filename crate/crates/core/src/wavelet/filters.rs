// Daubechies minimum-phase scaling filters for orders 1..=20, computed by
// spectral factorization in 60-digit arithmetic and rounded to 20 digits.

#[rustfmt::skip]
#[allow(clippy::excessive_precision, clippy::approx_constant)]
pub(crate) const DAUBECHIES: [&[f64]; 20] = [
    &[
        0.70710678118654752440,
        0.70710678118654752440,
    ],
    &[
        0.48296291314453414337,
        0.83651630373780790558,
        0.22414386804201338103,
        -0.12940952255126038117,
    ],
    &[
        0.33267055295008261600,
        0.80689150931109257649,
        0.45987750211849157010,
        -0.13501102001025458870,
        -0.085441273882026661693,
        0.035226291885709536603,
    ],
    &[
        0.23037781330889650086,
        0.71484657055291564709,
        0.63088076792985890788,
        -0.027983769416859854211,
        -0.18703481171909308408,
        0.030841381835560763627,
        0.032883011666885199735,
        -0.010597401785069032105,
    ],
    &[
        0.16010239797419291448,
        0.60382926979718967054,
        0.72430852843777292773,
        0.13842814590132073151,
        -0.24229488706638203186,
        -0.032244869584638374648,
        0.077571493840045713523,
        -0.0062414902127982742742,
        -0.012580751999081999469,
        0.0033357252854737712780,
    ],
    &[
        0.11154074335010946362,
        0.49462389039845308568,
        0.75113390802109535068,
        0.31525035170919762909,
        -0.22626469396543982008,
        -0.12976686756726193556,
        0.097501605587323049102,
        0.027522865530305728626,
        -0.031582039317486029565,
        0.00055384220116149613925,
        0.0047772575109455106396,
        -0.0010773010853084795649,
    ],
    &[
        0.077852054085009179020,
        0.39653931948191730654,
        0.72913209084623511992,
        0.46978228740519312247,
        -0.14390600392856497541,
        -0.22403618499387498264,
        0.071309219266830264751,
        0.080612609151083071913,
        -0.038029936935014413580,
        -0.016574541630666880654,
        0.012550998556099840613,
        0.00042957797292136652113,
        -0.0018016407040474909153,
        0.00035371379997452024845,
    ],
    &[
        0.054415842243104009955,
        0.31287159091429997066,
        0.67563073629728980681,
        0.58535468365420671277,
        -0.015829105256349305667,
        -0.28401554296154692652,
        0.00047248457391328277036,
        0.12874742662047845886,
        -0.017369301001807546170,
        -0.044088253930794751507,
        0.013981027917398281649,
        0.0087460940474057767164,
        -0.0048703529934515743104,
        -0.00039174037337694704630,
        0.00067544940645056936637,
        -0.00011747678412476953373,
    ],
    &[
        0.038077947363878346589,
        0.24383467461259035373,
        0.60482312369011111190,
        0.65728807805130053808,
        0.13319738582500757619,
        -0.29327378327917490881,
        -0.096840783222976460514,
        0.14854074933810638014,
        0.030725681479333379212,
        -0.067632829061329973676,
        0.00025094711483145195759,
        0.022361662123679097205,
        -0.0047232047577513972779,
        -0.0042815036824634298345,
        0.0018476468830562264766,
        0.00023038576352319596721,
        -0.00025196318894271013697,
        0.000039347320316271599481,
    ],
    &[
        0.026670057900555553587,
        0.18817680007769148902,
        0.52720118893172558648,
        0.68845903945360356574,
        0.28117234366057746075,
        -0.24984642432731537942,
        -0.19594627437737704350,
        0.12736934033579326008,
        0.093057364603572351160,
        -0.071394147166397087145,
        -0.029457536821875812858,
        0.033212674059341001740,
        0.0036065535669561696554,
        -0.010733175483330575044,
        0.0013953517470529011658,
        0.0019924052951850561172,
        -0.00068585669495971162656,
        -0.00011646685512928545095,
        0.000093588670320069591334,
        -0.000013264202894521244812,
    ],
    &[
        0.018694297761471084025,
        0.14406702115062451280,
        0.44989976435604533477,
        0.68568677491620051112,
        0.41196436894790746293,
        -0.16227524502749036224,
        -0.27423084681794696120,
        0.066043588196683191901,
        0.14981201246637849641,
        -0.046479955116684187272,
        -0.066438785695025205279,
        0.031335090219046076031,
        0.020840904360181063023,
        -0.015364820906201599426,
        -0.0033408588730144456061,
        0.0049284176560590411232,
        -0.00030859285881514316518,
        -0.00089302325066626461339,
        0.00024915252355282349887,
        0.000054439074699368471674,
        -0.000034634984186984995541,
        0.0000044942742772365100954,
    ],
    &[
        0.013112257957229517507,
        0.10956627282118515461,
        0.37735513521421265709,
        0.65719872257930708930,
        0.51588647842781560876,
        -0.044763885653774626668,
        -0.31617845375278553686,
        -0.023779257256069727684,
        0.18247860592757967985,
        0.0053595696743521503283,
        -0.096432120096507082027,
        0.010849130255822184381,
        0.041546277495084440739,
        -0.012218649069748280720,
        -0.012840825198300683295,
        0.0067114990087955091778,
        0.0022486072409952376000,
        -0.0021795036186277604716,
        0.0000065451282125095955665,
        0.00038865306282093144359,
        -0.000088504109208204324208,
        -0.000024241545757030784030,
        0.000012776952219379766587,
        -0.0000015290717580685109027,
    ],
    &[
        0.0092021335389623679730,
        0.082861243872902779644,
        0.31199632216043806340,
        0.61105585115878765282,
        0.58888957043121890807,
        0.086985726179647237310,
        -0.31497290771138863300,
        -0.12457673075081525894,
        0.17947607942933984323,
        0.072948933656777163809,
        -0.10580761818793432645,
        -0.026488406475343694640,
        0.056139477100283428862,
        0.0023799722540590788115,
        -0.023831420710323649032,
        0.0039239414487974162433,
        0.0072555894016175661945,
        -0.0027619112346568621780,
        -0.0013156739118922989366,
        0.00093232613086726338622,
        0.000049251525126289461921,
        -0.00016512898855650548946,
        0.000030678537579325493466,
        0.000010441930571408137082,
        -0.0000047004164793608683257,
        0.00000052200350984548646917,
    ],
    &[
        0.0064611534600879478182,
        0.062364758849398898328,
        0.25485026779262135367,
        0.55430561794089383599,
        0.63118784910485677956,
        0.21867068775890652149,
        -0.27168855227874804141,
        -0.21803352999327604476,
        0.13839521386480659107,
        0.13998901658446070125,
        -0.086748411568169689046,
        -0.071548955504046130736,
        0.055237126259216044116,
        0.026981408307912916974,
        -0.030185351540390635187,
        -0.0056150495303569591332,
        0.012789493266333408962,
        -0.00074621898926838493718,
        -0.0038496388680221874458,
        0.0010616910856067618430,
        0.00070802115423552785864,
        -0.00038683194731295448211,
        -0.000041777245770372597353,
        0.000068755042526975096039,
        -0.000010337209184570773947,
        -0.0000043897049017813941153,
        0.0000017249946753678127699,
        -0.00000017871399683113590763,
    ],
    &[
        0.0045385373615788988815,
        0.046743394892766271892,
        0.20602386398699573154,
        0.49263177170813962361,
        0.64581314035742435818,
        0.33900253545473152769,
        -0.19320413960914542871,
        -0.28888259656696564625,
        0.065282952848772816923,
        0.19014671400712298235,
        -0.039666176555790944484,
        -0.11112093603723169337,
        0.033877143923507686209,
        0.054780550584507612689,
        -0.025767007328439962586,
        -0.020810050169693081678,
        0.015083918027835902363,
        0.0051010003604075431697,
        -0.0064877345603157449952,
        -0.00024175649076162428117,
        0.0019433239803822115418,
        -0.00037348235413761699201,
        -0.00035956524436246881216,
        0.00015589648992059974795,
        0.000025792699155318936809,
        -0.000028133296266047813648,
        0.0000033629871817375798031,
        0.0000018112704079405770838,
        -0.00000063168823258816644212,
        0.000000061333599133057520291,
    ],
    &[
        0.0031892209253477380298,
        0.034907714323673346410,
        0.16506428348885311790,
        0.43031272284600381374,
        0.63735633208378889863,
        0.44029025688635690004,
        -0.089751089402489642857,
        -0.32706331052791770465,
        -0.027918208133028276683,
        0.21119069394710428872,
        0.027340263752716041365,
        -0.13238830556381039045,
        -0.0062397227524748717657,
        0.075924236044276315821,
        -0.0075889743688577376385,
        -0.036888397691730142334,
        0.010297659640955969412,
        0.013993768859828731030,
        -0.0069900145634139166703,
        -0.0036442796214983899322,
        0.0031280233812062688317,
        0.00040789698084971283624,
        -0.00094102174935956758893,
        0.00011424152003872239264,
        0.00017478724522533818038,
        -0.000061035966214109358352,
        -0.000013945668988208893452,
        0.000011336608661276258588,
        -0.0000010435713423116065015,
        -0.00000073636567854512055121,
        0.00000023087840868575458664,
        -0.000000021093396301007430970,
    ],
    &[
        0.0022418070010373128535,
        0.025985393703606043389,
        0.13121490330782440658,
        0.37035072415264115045,
        0.61099661568462281819,
        0.51831576405693783933,
        0.027314970403293635004,
        -0.32832074836396173609,
        -0.12659975221588270287,
        0.19731058956501099279,
        0.10113548917747027215,
        -0.12681569177828631109,
        -0.057091419631676927289,
        0.081105986654160885080,
        0.022312336178103795953,
        -0.046922438389269737333,
        -0.0032709555358192937817,
        0.022733676583946270318,
        -0.0030429899813546370686,
        -0.0086029215203228548317,
        0.0029679966915260948728,
        0.0023012052421535456243,
        -0.0014368453048029761262,
        -0.00032813251940983797140,
        0.00043946542776864367784,
        -0.000025610109566548458827,
        -0.000082048032024533918391,
        0.000023186813798745950845,
        0.0000069906009850767512732,
        -0.0000045059424772229881941,
        0.00000030165496099945574156,
        0.00000029577009333168567550,
        -0.000000084239484460026801788,
        0.0000000072674929685616081109,
    ],
    &[
        0.0015763102184407604315,
        0.019288531724146377059,
        0.10358846582242359622,
        0.31467894133703169906,
        0.57182680776660722348,
        0.57180165488865133529,
        0.14722311196992814158,
        -0.29365404073655874425,
        -0.21648093400514297112,
        0.14953397556537778935,
        0.16708131276325740451,
        -0.092331884150846280604,
        -0.10675224665982848559,
        0.064887216211905442819,
        0.057051247738536884121,
        -0.044526141902982324716,
        -0.023733210395860001033,
        0.026670705926470590300,
        0.0062621679543057074852,
        -0.013051480946612001773,
        0.00011863003385811746573,
        0.0049433436054667381307,
        -0.0011187326669924970728,
        -0.0013405962983361066295,
        0.00062846568296514571256,
        0.00021358156191034068840,
        -0.00019864855231174794858,
        -0.00000015359171235347246751,
        0.000037412378807400381811,
        -0.0000085206025374466952039,
        -0.0000033326344788858218888,
        0.0000017687129836276154559,
        -0.000000076916326898851761460,
        -0.00000011760987670282316985,
        0.000000030688358630451748009,
        -0.0000000025079344549485982672,
    ],
    &[
        0.0011086697631817105711,
        0.014281098450764397374,
        0.081278113265459550653,
        0.26438843174089678467,
        0.52443637746465491534,
        0.60170454912753789489,
        0.26089495265103882929,
        -0.22809139421548264637,
        -0.28583863175582624185,
        0.074652269708103266368,
        0.21234974330627848881,
        -0.033518541902302878682,
        -0.14278569503873657498,
        0.027584350625628668750,
        0.086906755555812232488,
        -0.026501236250123040899,
        -0.045674226277230908056,
        0.021623767409585047130,
        0.019375549889176127646,
        -0.013988388678535141633,
        -0.0058669222810121747266,
        0.0070407473671052431530,
        0.00076895435925754835597,
        -0.0026875518007015820040,
        0.00034180865345859577657,
        0.00073580252050543520703,
        -0.00026067613567862800573,
        -0.00012460079173415877534,
        0.000087112704672199229654,
        0.0000051059504870738860530,
        -0.000016640176297154944546,
        0.0000030109643162965263397,
        0.0000015319314766911930639,
        -0.00000068627556577691427019,
        0.000000014470882987978445421,
        0.000000046369377757826042234,
        -0.000000011164020670358258164,
        0.00000000086668488389976193503,
    ],
    &[
        0.00077995361366684632159,
        0.010549394624950398325,
        0.063423780459081514976,
        0.21994211355139704501,
        0.47269618531090169637,
        0.61049323893859382016,
        0.36150229873933106292,
        -0.13921208801148387258,
        -0.32678680043403496740,
        -0.016727088309077007575,
        0.22829105081991632297,
        0.039850246457771202198,
        -0.15545875070726795593,
        -0.024716827338613584016,
        0.10229171917444255789,
        0.0056322468573074355070,
        -0.061722899624680459733,
        0.0058746818118118264913,
        0.032294299530769581759,
        -0.0087893249239015613488,
        -0.013810526137151920078,
        0.0067216273022594568353,
        0.0044205423870457909631,
        -0.0035814942596096227776,
        -0.00083156217282255691925,
        0.0013925596193231363239,
        -0.000053497598439976950518,
        -0.00038510474869921760607,
        0.00010153288973670290508,
        0.000067742808283777295580,
        -0.000037105861833947128642,
        -0.0000043761438621839968104,
        0.0000072412482876736201028,
        -0.0000010119940100188861503,
        -0.00000068470795970005568942,
        0.00000026339242262700010841,
        0.00000000020143220235505126943,
        -0.000000018148432482996959732,
        0.0000000040561270555518327661,
        -0.00000000029988364896193195664,
    ],
];
