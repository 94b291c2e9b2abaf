#pragma once

#include <string_view>

namespace protoseq {

// Built-in irregular-form table: inflected form <TAB> base lemma, one per
// line. Seeded from the standard English irregular-verb list plus common
// irregular noun plurals. Two curation rules keep normalization idempotent:
// forms whose spelling collides with an unrelated noun reachable by stemming
// (saw, rose, wound, bound, found, ground, bit, dove) are left out, as are
// entries whose stemmed lemma ends in a bare "s" the stemmer would re-strip
// (mice/louse/geese).
inline constexpr std::string_view kIrregularLemmaTable = R"(am	be
are	be
arisen	arise
arose	arise
ate	eat
awoke	awake
awoken	awake
became	become
been	be
began	begin
begun	begin
bent	bend
bitten	bite
bled	bleed
blew	blow
blown	blow
bore	bear
born	bear
borne	bear
bought	buy
bred	breed
broke	break
broken	break
brought	bring
built	build
burnt	burn
calves	calf
came	come
caught	catch
children	child
chose	choose
chosen	choose
clung	cling
crept	creep
dealt	deal
did	do
done	do
drank	drink
drawn	draw
dreamt	dream
drew	draw
driven	drive
drove	drive
drunk	drink
dug	dig
eaten	eat
elves	elf
fallen	fall
feet	foot
fell	fall
felt	feel
fed	feed
fled	flee
flew	fly
flown	fly
forbade	forbid
forbidden	forbid
forgave	forgive
forgiven	forgive
forgot	forget
forgotten	forget
fought	fight
froze	freeze
frozen	freeze
gave	give
given	give
gone	go
got	get
gotten	get
grew	grow
grown	grow
had	have
halves	half
has	have
heard	hear
held	hold
hid	hide
hidden	hide
hung	hang
is	be
kept	keep
knelt	kneel
knew	know
knives	knife
known	know
laid	lay
lain	lie
leant	lean
leapt	leap
learnt	learn
leaves	leaf
led	lead
left	leave
lent	lend
lit	light
lives	life
loaves	loaf
lost	lose
made	make
meant	mean
men	man
met	meet
mistaken	mistake
mistook	mistake
mown	mow
oxen	ox
paid	pay
people	person
ran	run
ridden	ride
rang	ring
risen	rise
rode	ride
rung	ring
said	say
sang	sing
sank	sink
sat	sit
scarves	scarf
seen	see
selves	self
sent	send
sewn	sew
shaken	shake
shelves	shelf
shone	shine
shook	shake
shot	shoot
shown	show
shrank	shrink
shrunk	shrink
sung	sing
sunk	sink
slept	sleep
slid	slide
smelt	smell
snuck	sneak
sold	sell
spat	spit
sped	speed
spelt	spell
spent	spend
spilt	spill
spoke	speak
spoken	speak
spoilt	spoil
sprang	spring
sprung	spring
spun	spin
stank	stink
stole	steal
stolen	steal
stood	stand
struck	strike
strove	strive
striven	strive
stuck	stick
stung	sting
stunk	stink
swam	swim
swept	sweep
swore	swear
sworn	swear
swum	swim
swung	swing
taken	take
taught	teach
teeth	tooth
thieves	thief
thought	think
threw	throw
thrown	throw
told	tell
took	take
tore	tear
torn	tear
trod	tread
trodden	tread
understood	understand
was	be
went	go
wept	weep
were	be
wives	wife
woke	wake
woken	wake
wolves	wolf
women	woman
won	win
wore	wear
worn	wear
wove	weave
woven	weave
written	write
wrote	write
wrung	wring
)";

}  // namespace protoseq
